"""Spatially-variant image degradation by per-region PSF convolution.

The image is tiled into grid_rows x grid_cols regions; region (r, c) of
each channel is convolved with cell (r, c) of that channel's PSF grid.
Convolutions read true neighbouring-region pixels from a single padded
copy of the channel, so region seams carry no synthetic boundary; the
image border is synthesized per the boundary policy. Kernels are
unit-sum normalized so mean brightness is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DimensionMismatchError, OptiblurError
from .image import RasterImage
from .psf import PSF
from .psfgrid import PSFGrid

BOUNDARY_MODES = {"mirror": "symmetric", "clamp": "edge", "zero": "constant"}
# Direct convolution below this kernel area, FFT above.
_DIRECT_AREA_LIMIT = 15 * 15


@dataclass(frozen=True)
class DegradationPlan:
    """Region tiling and seam policy for one image size."""

    grid_rows: int
    grid_cols: int
    region_w: int
    region_h: int
    boundary: str = "mirror"
    blend: str = "hard"          # "hard" | "feather"
    feather_px: int = 8

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise OptiblurError(f"boundary must be one of {sorted(BOUNDARY_MODES)}")
        if self.blend not in ("hard", "feather"):
            raise OptiblurError("blend must be 'hard' or 'feather'")
        if min(self.grid_rows, self.grid_cols, self.region_w, self.region_h) < 1:
            raise OptiblurError("plan dimensions must be positive")
        if self.blend == "feather" and self.feather_px < 1:
            raise OptiblurError("feather width must be >= 1 px")

    def validate_for(self, img: RasterImage) -> None:
        if self.grid_rows * self.region_h != img.height:
            raise DimensionMismatchError(
                f"{self.grid_rows} rows x {self.region_h} px != image height {img.height}"
            )
        if self.grid_cols * self.region_w != img.width:
            raise DimensionMismatchError(
                f"{self.grid_cols} cols x {self.region_w} px != image width {img.width}"
            )


def plan_for_image(img: RasterImage, grid_rows: int, grid_cols: int,
                   boundary: str = "mirror", blend: str = "hard",
                   feather_px: int = 8) -> DegradationPlan:
    """Derive region sizes from the image; dims must divide evenly."""
    if img.height % grid_rows or img.width % grid_cols:
        raise DimensionMismatchError(
            f"image {img.width}x{img.height} not divisible by grid {grid_cols}x{grid_rows}"
        )
    return DegradationPlan(grid_rows, grid_cols, img.width // grid_cols,
                           img.height // grid_rows, boundary, blend, feather_px)


def normalize_kernel(psf: PSF | np.ndarray) -> np.ndarray:
    """Unit-sum convolution kernel; the last element absorbs rounding."""
    arr = psf.intensity if isinstance(psf, PSF) else np.asarray(psf, dtype=float)
    if np.any(arr < 0):
        raise ValueError("PSF must be nonnegative")
    total = arr.sum()
    if total <= 0:
        raise ValueError("all-zero PSF cannot be normalized")
    k = arr / total
    k[-1, -1] += 1.0 - k.sum()
    return k


def mean_brightness(img: RasterImage) -> tuple[float, float, float]:
    means = img.values.reshape(-1, 3).mean(axis=0)
    return float(means[0]), float(means[1]), float(means[2])


def _delta_shift(kernel: np.ndarray) -> tuple[int, int] | None:
    """(i0, j0) when the kernel is a one-hot delta, else None."""
    nz = np.flatnonzero(kernel)
    if nz.size != 1 or kernel.flat[nz[0]] != 1.0:
        return None
    i0, j0 = np.unravel_index(nz[0], kernel.shape)
    return int(i0), int(j0)


def _convolve_valid(src: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    delta = _delta_shift(kernel)
    if delta is not None:
        # Pure shift: bit-exact, no arithmetic on the samples.
        kh, kw = kernel.shape
        i0, j0 = delta
        oy = kh - 1 - i0
        ox = kw - 1 - j0
        h = src.shape[0] - kh + 1
        w = src.shape[1] - kw + 1
        return src[oy:oy + h, ox:ox + w]
    method = "direct" if kernel.size <= _DIRECT_AREA_LIMIT else "fft"
    return signal.convolve(src, kernel, mode="valid", method=method)


def _region_weight(length: int, n_regions: int, region: int, size: int,
                   feather: int) -> np.ndarray:
    """1-D crossfade weight of one region; adjacent ramps sum to one."""
    a = region * size
    b = a + size
    x = np.arange(length) + 0.5
    left = (x - (a - feather / 2.0)) / feather if region > 0 else np.full(length, np.inf)
    right = ((b + feather / 2.0) - x) / feather if region < n_regions - 1 else np.full(length, np.inf)
    return np.clip(np.minimum(left, right), 0.0, 1.0)


def degrade_image(img: RasterImage, grids: tuple[PSFGrid, PSFGrid, PSFGrid],
                  plan: DegradationPlan) -> RasterImage:
    """Apply per-channel PSF grids region by region.

    ``grids`` is ordered (R, G, B) and must be sorted by strictly
    decreasing wavelength; grid dims must equal the plan's.
    """
    plan.validate_for(img)
    if len(grids) != img.channels:
        raise DimensionMismatchError(f"need {img.channels} grids, got {len(grids)}")
    wl = [g.wavelength_nm for g in grids]
    if not (wl[0] > wl[1] > wl[2]):
        raise OptiblurError(
            f"grids must be (R, G, B) by decreasing wavelength, got {wl} nm"
        )
    for g in grids:
        if (g.rows, g.cols) != (plan.grid_rows, plan.grid_cols):
            raise DimensionMismatchError(
                f"grid {g.rows}x{g.cols} != plan {plan.grid_rows}x{plan.grid_cols}"
            )

    out = np.empty(img.values.shape, dtype=np.float64)
    for ch in range(img.channels):
        out[:, :, ch] = _degrade_channel(img.values[:, :, ch].astype(np.float64),
                                         grids[ch], plan)
    return RasterImage(np.clip(out, 0.0, 1.0).astype(np.float32))


def _degrade_channel(channel: np.ndarray, grid: PSFGrid,
                     plan: DegradationPlan) -> np.ndarray:
    kh = kw = grid.cell_size_px
    lo_y, hi_y = (kh - 1) // 2, kh // 2
    lo_x, hi_x = (kw - 1) // 2, kw // 2
    mode = BOUNDARY_MODES[plan.boundary]
    H, W = channel.shape
    rh, rw = plan.region_h, plan.region_w

    kernels = [[normalize_kernel(grid.cells[r][c]) for c in range(plan.grid_cols)]
               for r in range(plan.grid_rows)]

    if plan.blend == "hard":
        padded = np.pad(channel, ((lo_y, hi_y), (lo_x, hi_x)), mode=mode)
        out = np.empty_like(channel)
        for r in range(plan.grid_rows):
            for c in range(plan.grid_cols):
                src = padded[r * rh:r * rh + rh + kh - 1,
                             c * rw:c * rw + rw + kw - 1]
                out[r * rh:(r + 1) * rh, c * rw:(c + 1) * rw] = \
                    _convolve_valid(src, kernels[r][c])
        return out

    # Feather: each region is rendered over a window grown by the half
    # feather width and cross-faded with separable linear ramps.
    grow = int(np.ceil(plan.feather_px / 2.0))
    padded = np.pad(channel, ((lo_y + grow, hi_y + grow), (lo_x + grow, hi_x + grow)),
                    mode=mode)
    acc = np.zeros_like(channel)
    wsum = np.zeros_like(channel)
    for r in range(plan.grid_rows):
        wy = _region_weight(H, plan.grid_rows, r, rh, plan.feather_px)
        ys, ye = max(0, r * rh - grow), min(H, (r + 1) * rh + grow)
        for c in range(plan.grid_cols):
            wx = _region_weight(W, plan.grid_cols, c, rw, plan.feather_px)
            xs, xe = max(0, c * rw - grow), min(W, (c + 1) * rw + grow)
            # Image row i lives at padded row i + grow relative to the
            # hard-path source origin, hence the (ys + grow) offset.
            src = padded[ys + grow:ye + grow + kh - 1,
                         xs + grow:xe + grow + kw - 1]
            tile = _convolve_valid(src, kernels[r][c])
            w2d = wy[ys:ye, None] * wx[None, xs:xe]
            acc[ys:ye, xs:xe] += tile * w2d
            wsum[ys:ye, xs:xe] += w2d
    return acc / wsum
