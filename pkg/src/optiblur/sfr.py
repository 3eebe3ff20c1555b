"""Slanted-edge spatial frequency response (e-SFR) measurement.

Pipeline for a near-vertical edge (near-horizontal ROIs are transposed
first): per-row sub-pixel edge location by centroid of the windowed
derivative, least-squares line fit for the edge angle, projection of all
ROI pixels onto the edge normal, binning into a 4x oversampled ESF,
discrete differentiation to the LSF, a Hamming window centred on the LSF
peak, and the normalized DFT magnitude corrected for the discrete
derivative's sinc response. Curves are reported on a uniform frequency
grid of 1/512 cy/px from 0 to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EdgeError, NoCrossingError

FREQ_STEP = 1.0 / 512.0
ANGLE_MIN_DEG = 2.0
ANGLE_MAX_DEG = 10.0


@dataclass(frozen=True)
class EdgeROI:
    """Rectangular region of interest containing one slanted edge."""

    x: int
    y: int
    w: int
    h: int
    polarity: str | None = None   # "rising" | "falling" | None (auto)
    region: str | None = None     # annulus label, filled by partition_rois

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def crop(self, channel: np.ndarray) -> np.ndarray:
        H, W = channel.shape
        if self.x < 0 or self.y < 0 or self.x + self.w > W or self.y + self.h > H:
            raise EdgeError(f"ROI {self} not fully inside {W}x{H} image")
        return channel[self.y:self.y + self.h, self.x:self.x + self.w]


@dataclass
class SFRCurve:
    """Response on a uniform [0, 1] cy/px frequency grid, response(0) = 1."""

    frequencies: np.ndarray
    response: np.ndarray
    edge_angle_deg: float = 0.0

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.frequencies.shape != self.response.shape:
            raise ValueError("frequency and response grids differ in length")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if abs(self.response[0] - 1.0) > 1e-9:
            raise ValueError(f"response(0) = {self.response[0]} != 1")


def _row_centroids(patch: np.ndarray, min_signal: float):
    """Sub-pixel edge position per row from the windowed |derivative|."""
    h, w = patch.shape
    deriv = np.diff(patch, axis=1)  # sits at x + 0.5
    mag = np.abs(deriv)
    xs = np.arange(w - 1) + 0.5
    centroids = np.full(h, np.nan)
    # First pass: plain centroid; second: Hamming window around it.
    totals = mag.sum(axis=1)
    ok = totals > min_signal
    first = (mag * xs).sum(axis=1)[ok] / totals[ok]
    half = max(8.0, w / 4.0)
    rows = np.where(ok)[0]
    for row, c0 in zip(rows, first):
        u = (xs - c0) / half
        win = np.where(np.abs(u) <= 1.0, 0.54 + 0.46 * np.cos(np.pi * u), 0.0)
        wmag = mag[row] * win
        tot = wmag.sum()
        if tot > min_signal:
            centroids[row] = (wmag * xs).sum() / tot
    return centroids


def esfr(channel: np.ndarray, roi: EdgeROI | None = None, oversample: int = 4,
         min_contrast: float = 0.05) -> SFRCurve:
    """Measure the SFR of the slanted edge inside a single-channel ROI.

    Raises EdgeError when no edge is found, the slant is outside the
    2..10 degree validity window, or the edge amplitude is too small.
    """
    patch = np.asarray(channel, dtype=np.float64)
    if roi is not None:
        patch = roi.crop(patch).astype(np.float64)
    if patch.ndim != 2 or min(patch.shape) < 8:
        raise EdgeError("ROI too small for edge analysis")

    # Work on a near-vertical edge; transpose when the gradient energy
    # says the edge is near-horizontal.
    gx = np.abs(np.diff(patch, axis=1)).sum()
    gy = np.abs(np.diff(patch, axis=0)).sum()
    if gy > gx:
        patch = patch.T

    amplitude = float(patch.max() - patch.min())
    if amplitude < min_contrast:
        raise EdgeError(f"edge amplitude {amplitude:.4f} below threshold {min_contrast}")

    min_signal = amplitude * 0.05
    centroids = _row_centroids(patch, min_signal)
    valid = np.isfinite(centroids)
    if valid.sum() < max(8, patch.shape[0] // 2):
        raise EdgeError("no consistent edge transition across ROI rows")

    rows = np.arange(patch.shape[0], dtype=float)
    slope, intercept = np.polyfit(rows[valid], centroids[valid], 1)
    angle = math.degrees(math.atan(slope))
    if not (ANGLE_MIN_DEG <= abs(angle) <= ANGLE_MAX_DEG):
        raise EdgeError(
            f"edge angle {angle:.2f} deg outside [{ANGLE_MIN_DEG}, {ANGLE_MAX_DEG}] validity window"
        )

    # Signed distance of each pixel centre to the fitted edge line.
    yy, xx = np.mgrid[0:patch.shape[0], 0:patch.shape[1]]
    cos_t = 1.0 / math.sqrt(1.0 + slope * slope)
    dist = (xx - (slope * yy + intercept)) * cos_t

    bins = np.round(dist * oversample).astype(int)
    bins -= bins.min()
    nbins = bins.max() + 1
    sums = np.bincount(bins.ravel(), weights=patch.ravel(), minlength=nbins)
    counts = np.bincount(bins.ravel(), minlength=nbins)
    esf = np.full(nbins, np.nan)
    nz = counts > 0
    esf[nz] = sums[nz] / counts[nz]
    if np.any(~nz):
        # Patch empty bins from their nearest filled neighbours.
        idx = np.arange(nbins)
        esf[~nz] = np.interp(idx[~nz], idx[nz], esf[nz])

    lsf = np.diff(esf)
    win = _shifted_hamming(len(lsf), int(np.argmax(np.abs(lsf))))
    lsf_w = lsf * win

    nfft = oversample * 512
    if len(lsf_w) > nfft:
        # Very wide ROI: keep the window-length record around the peak.
        peak = int(np.argmax(np.abs(lsf_w)))
        start = min(max(0, peak - nfft // 2), len(lsf_w) - nfft)
        lsf_w = lsf_w[start:start + nfft]
    spectrum = np.abs(np.fft.rfft(lsf_w, n=nfft))
    if spectrum[0] <= 0:
        raise EdgeError("degenerate edge spectrum (zero DC)")
    freqs = np.arange(513) * FREQ_STEP  # k * oversample / nfft
    response = spectrum[:513] / spectrum[0]
    # Undo the backward-difference transfer function.
    corr = np.sinc(freqs / oversample)
    response = response / corr
    response[0] = 1.0
    return SFRCurve(freqs, response, edge_angle_deg=angle)


def _shifted_hamming(length: int, center: int) -> np.ndarray:
    """Full-record Hamming window re-centred on the given sample."""
    i = np.arange(length)
    u = (i - center) / (length - 1) + 0.5
    return np.where((u >= 0.0) & (u <= 1.0),
                    0.54 - 0.46 * np.cos(2.0 * np.pi * u), 0.0)


def mtf50(curve: SFRCurve) -> float:
    """Lowest frequency where the response crosses 0.5, interpolated."""
    return crossing_frequency(curve, 0.5)


def crossing_frequency(curve: SFRCurve, level: float) -> float:
    r = curve.response
    f = curve.frequencies
    below = np.where(r < level)[0]
    if below.size == 0:
        raise NoCrossingError(
            f"response never falls below {level} within [0, {f[-1]:.3f}] cy/px"
        )
    k = below[0]
    if k == 0:
        return float(f[0])
    f0, f1 = f[k - 1], f[k]
    r0, r1 = r[k - 1], r[k]
    return float(f0 + (r0 - level) / (r0 - r1) * (f1 - f0))
