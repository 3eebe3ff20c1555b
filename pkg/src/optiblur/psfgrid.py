"""Field-sampled PSF grids: rendering, aspect resize, mosaic preview.

Grid cell (r, c) corresponds to the image region (r, c) of an equally
tiled target image: field directions map linearly to region centres. For
non-square grids the larger dimension spans the full +/-fov and the
smaller one a proportionally reduced range, so that shrinking a square
grid to the image aspect amounts to selecting the central rows/columns.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import OptiblurError
from .image import RasterImage
from .prescription import LensPrescription
from .psf import PSF, build_pupil, fraunhofer_psf


class GridRenderError(OptiblurError):
    """A grid cell failed to render; carries the failing cell index."""

    def __init__(self, row: int, col: int, cause: Exception):
        self.row, self.col, self.cause = row, col, cause
        super().__init__(f"cell ({row}, {col}): {cause}")


@dataclass
class PSFGrid:
    """rows x cols array of PSFs for one wavelength channel."""

    cells: list[list[PSF]]
    wavelength_nm: float
    fov_deg: float
    cell_size_px: int
    theta_y_deg: tuple[float, ...]
    theta_x_deg: tuple[float, ...]

    def __post_init__(self):
        rows, cols = self.shape
        if len(self.theta_y_deg) != rows or len(self.theta_x_deg) != cols:
            raise OptiblurError("field-angle lists must match the grid shape")
        for row in self.cells:
            for cell in row:
                if cell.size != self.cell_size_px:
                    raise OptiblurError(
                        f"cell size {cell.size} != grid cell_size_px {self.cell_size_px}"
                    )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0])

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell(self, row: int, col: int) -> PSF:
        return self.cells[row][col]


def grid_field_angles(rows: int, cols: int, fov_deg: float) -> tuple[list[float], list[float]]:
    """Cell-centre field angles (theta_y per row, theta_x per col)."""
    big = max(rows, cols)

    def centres(n: int) -> list[float]:
        extent = fov_deg * n / big
        return [extent * ((2 * j + 1) / n - 1.0) for j in range(n)]

    return centres(rows), centres(cols)


def render_psf_grid(p: LensPrescription, rows: int, cols: int, fov_deg: float,
                    wavelength_nm: float, cell_size_px: int = 160,
                    pupil_samples: int = 128, pad_factor: int = 4,
                    pixel_pitch_um: float | None = None,
                    workers: int = 1) -> PSFGrid:
    """Render the full field grid of Fraunhofer PSFs for one wavelength."""
    if rows < 1 or cols < 1:
        raise OptiblurError(f"grid dims {rows} x {cols} invalid")
    if fov_deg <= 0:
        raise OptiblurError(f"fov {fov_deg} must be > 0")
    th_y, th_x = grid_field_angles(rows, cols, fov_deg)

    def render_cell(rc: tuple[int, int]) -> PSF:
        r, c = rc
        try:
            pupil = build_pupil(p, th_x[c], th_y[r], wavelength_nm, pupil_samples)
            return fraunhofer_psf(pupil, pad_factor, cell_size_px, pixel_pitch_um)
        except Exception as e:
            raise GridRenderError(r, c, e) from e

    indices = [(r, c) for r in range(rows) for c in range(cols)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(render_cell, indices))
    else:
        flat = [render_cell(rc) for rc in indices]
    cells = [[flat[r * cols + c] for c in range(cols)] for r in range(rows)]
    return PSFGrid(cells, wavelength_nm, fov_deg, cell_size_px,
                   tuple(th_y), tuple(th_x))


def resize_grid(g: PSFGrid, rows: int, cols: int) -> PSFGrid:
    """Shrink a grid to a new aspect by nearest-field-direction selection."""
    if rows > g.rows or cols > g.cols:
        raise OptiblurError(
            f"cannot upsize grid {g.rows} x {g.cols} to {rows} x {cols}"
        )
    if (rows, cols) == (g.rows, g.cols):
        return g
    tgt_y, tgt_x = grid_field_angles(rows, cols, g.fov_deg)
    src_y = np.asarray(g.theta_y_deg)
    src_x = np.asarray(g.theta_x_deg)
    pick_r = [int(np.argmin(np.abs(src_y - t))) for t in tgt_y]
    pick_c = [int(np.argmin(np.abs(src_x - t))) for t in tgt_x]
    cells = [[g.cells[r][c] for c in pick_c] for r in pick_r]
    return PSFGrid(cells, g.wavelength_nm, g.fov_deg, g.cell_size_px,
                   tuple(float(src_y[r]) for r in pick_r),
                   tuple(float(src_x[c]) for c in pick_c))


def mosaic(g: PSFGrid, gamma: float = 1.0) -> RasterImage:
    """Tile the grid into one preview image, each cell peak-normalized."""
    cs = g.cell_size_px
    mono = np.empty((g.rows * cs, g.cols * cs), dtype=np.float32)
    for r in range(g.rows):
        for c in range(g.cols):
            cell = g.cells[r][c].intensity
            peak = cell.max()
            tile = cell / peak if peak > 0 else cell
            if gamma != 1.0:
                tile = np.power(tile, gamma)
            mono[r * cs:(r + 1) * cs, c * cs:(c + 1) * cs] = tile
    return RasterImage(np.repeat(mono[:, :, None], 3, axis=2))
