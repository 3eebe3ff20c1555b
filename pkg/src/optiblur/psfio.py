"""PSF and PSF-grid import/export.

A PSF on disk is three files sharing a stem: `<stem>.raw` (row-major
float64), `<stem>.json` (dims, pitch, wavelength, field) and `<stem>.png`
(16-bit peak-normalized preview). A grid is a directory of cell files
plus `manifest.json`. The same layout serves as the import path for
externally generated reference PSFs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import PSFFormatError
from .image import save_gray_png16
from .psf import PSF
from .psfgrid import PSFGrid

_FORMAT = "float64-row-major"


def _stem(path) -> Path:
    path = Path(path)
    if path.suffix in (".raw", ".json", ".png"):
        return path.with_suffix("")
    return path


def export_psf(psf: PSF, path) -> list[Path]:
    """Write raw payload, JSON sidecar and PNG preview. Returns the paths."""
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    raw = stem.with_suffix(".raw")
    sidecar = stem.with_suffix(".json")
    preview = stem.with_suffix(".png")

    data = np.ascontiguousarray(psf.intensity, dtype=np.float64)
    raw.write_bytes(data.tobytes())
    meta = {
        "format": _FORMAT,
        "dims": list(data.shape),
        "pixel_pitch_um": psf.pixel_pitch_um,
        "wavelength_nm": psf.wavelength_nm,
        "field_deg": list(psf.field_deg),
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    peak = data.max()
    save_gray_png16(data / peak if peak > 0 else data, preview)
    return [raw, sidecar, preview]


def load_psf(path) -> PSF:
    """Load a PSF written by export_psf (any of the three paths works)."""
    stem = _stem(path)
    raw = stem.with_suffix(".raw")
    sidecar = stem.with_suffix(".json")
    if not sidecar.exists():
        raise PSFFormatError(f"missing sidecar {sidecar}")
    if not raw.exists():
        raise PSFFormatError(f"missing payload {raw}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise PSFFormatError(f"malformed sidecar {sidecar}: {e}") from None
    if meta.get("format") != _FORMAT:
        raise PSFFormatError(f"unsupported format {meta.get('format')!r}")
    try:
        dims = tuple(int(d) for d in meta["dims"])
        pitch = float(meta["pixel_pitch_um"])
        wavelength = float(meta["wavelength_nm"])
        field = tuple(float(v) for v in meta.get("field_deg", (0.0, 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise PSFFormatError(f"sidecar missing/invalid field: {e}") from None
    payload = np.frombuffer(raw.read_bytes(), dtype=np.float64)
    if payload.size != dims[0] * dims[1]:
        raise PSFFormatError(
            f"payload holds {payload.size} samples, sidecar declares {dims[0]}x{dims[1]}"
        )
    return PSF(payload.reshape(dims).copy(), pitch, wavelength, field)


def export_grid(grid: PSFGrid, directory) -> list[Path]:
    """Write all cells plus a manifest into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    names = []
    for r in range(grid.rows):
        row_names = []
        for c in range(grid.cols):
            stem = directory / f"cell_r{r:02d}_c{c:02d}"
            written.extend(export_psf(grid.cells[r][c], stem))
            row_names.append(stem.name)
        names.append(row_names)
    manifest = {
        "rows": grid.rows,
        "cols": grid.cols,
        "cell_size_px": grid.cell_size_px,
        "wavelength_nm": grid.wavelength_nm,
        "fov_deg": grid.fov_deg,
        "theta_y_deg": list(grid.theta_y_deg),
        "theta_x_deg": list(grid.theta_x_deg),
        "cells": names,
    }
    mpath = directory / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(mpath)
    return written


def load_grid(directory) -> PSFGrid:
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise PSFFormatError(f"missing grid manifest {mpath}")
    try:
        meta = json.loads(mpath.read_text())
        rows, cols = int(meta["rows"]), int(meta["cols"])
        names = meta["cells"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise PSFFormatError(f"malformed grid manifest: {e}") from None
    if len(names) != rows or any(len(row) != cols for row in names):
        raise PSFFormatError("manifest cell table does not match declared dims")
    cells = [[load_psf(directory / names[r][c]) for c in range(cols)] for r in range(rows)]
    return PSFGrid(
        cells,
        wavelength_nm=float(meta["wavelength_nm"]),
        fov_deg=float(meta["fov_deg"]),
        cell_size_px=int(meta["cell_size_px"]),
        theta_y_deg=tuple(float(v) for v in meta["theta_y_deg"]),
        theta_x_deg=tuple(float(v) for v in meta["theta_x_deg"]),
    )
