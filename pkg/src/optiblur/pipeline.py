"""One-command pipeline: trace -> PSF grids -> degrade -> report -> manifest.

The configuration is a single JSON file; every produced artifact is
listed in ``manifest.json`` with its SHA-256, so reruns can be compared
byte for byte. Nothing in the pipeline draws entropy: identical configs
produce identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import degrade, metrology, paraxial, psfgrid, psfio
from .errors import ConfigError, OptiblurError
from .image import RasterImage, load_png, save_png
from .prescription import LensPrescription, load_prescription
from .sfr import EdgeROI


@dataclass
class PipelineConfig:
    prescription: str
    images: list[str] = field(default_factory=list)
    wavelengths_nm: tuple[float, float, float] = (656.0, 531.0, 486.0)
    fov_deg: float = 2.0
    grid: int = 8
    cell_px: int = 160
    region_px: int = 160
    boundary: str = "mirror"
    blend: str = "hard"
    feather_px: int = 8
    pupil_samples: int = 128
    pad_factor: int = 4
    pixel_pitch_um: float | None = None
    autofocus: bool = True
    reference_wavelength_nm: float = paraxial.REFERENCE_WAVELENGTH_NM
    rois: str | None = None
    annuli: tuple[float, float] | None = None
    out_dir: str = "out"
    threads: int = 1

    @staticmethod
    def from_json(path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config {path}: {e}") from None
        known = set(PipelineConfig.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = PipelineConfig(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not Path(self.prescription).exists():
            raise ConfigError(f"prescription file {self.prescription} not found")
        for img in self.images:
            if not Path(img).exists():
                raise ConfigError(f"image file {img} not found")
        if self.rois is not None and not Path(self.rois).exists():
            raise ConfigError(f"ROI file {self.rois} not found")
        wl = tuple(self.wavelengths_nm)
        if len(wl) != 3 or not (wl[0] > wl[1] > wl[2]):
            raise ConfigError(f"wavelengths must be 3 values, decreasing (R,G,B): {wl}")
        self.wavelengths_nm = wl
        if self.annuli is not None:
            r1, r2 = self.annuli
            if not 0 < r1 < r2:
                raise ConfigError(f"annuli radii must satisfy 0 < r1 < r2: {self.annuli}")
        if self.grid < 1 or self.cell_px < 1 or self.region_px < 1:
            raise ConfigError("grid, cell_px and region_px must be positive")

    def to_dict(self) -> dict:
        d = dict(self.__dataclass_fields__)
        return {k: getattr(self, k) for k in d}


class PipelineStageError(OptiblurError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_roi_file(path) -> list[EdgeROI]:
    try:
        raw = json.loads(Path(path).read_text())
        return [EdgeROI(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"]),
                        r.get("polarity")) for r in raw]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed ROI file {path}: {e}") from None


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute all stages; returns the manifest dict (also written to disk)."""
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: list[Path] = []

    def stage(name):
        def wrap(fn, *args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except OptiblurError:
                raise
            except Exception as e:
                raise PipelineStageError(name, e) from e
        return wrap

    # 1. prescription (+ optional paraxial image solve)
    try:
        p = load_prescription(cfg.prescription)
        if cfg.autofocus:
            p = paraxial.refocus(p, cfg.reference_wavelength_nm)
    except OptiblurError as e:
        raise PipelineStageError("prescription", e) from e

    # 2. PSF grids, one per channel, plus mosaics
    grids = []
    for wl in cfg.wavelengths_nm:
        try:
            g = psfgrid.render_psf_grid(
                p, cfg.grid, cfg.grid, cfg.fov_deg, wl,
                cell_size_px=cfg.cell_px, pupil_samples=cfg.pupil_samples,
                pad_factor=cfg.pad_factor, pixel_pitch_um=cfg.pixel_pitch_um,
                workers=cfg.threads)
        except OptiblurError as e:
            raise PipelineStageError("psf-grid", e) from e
        grids.append(g)
        gdir = out_dir / f"grid_{wl:.0f}nm"
        artifacts.extend(psfio.export_grid(g, gdir))
        mosaic_path = out_dir / f"mosaic_{wl:.0f}nm.png"
        save_png(psfgrid.mosaic(g, gamma=0.5), mosaic_path)
        artifacts.append(mosaic_path)

    # 3. degrade every input image
    report: dict = {"images": []}
    for img_path in cfg.images:
        entry = _degrade_one(cfg, grids, Path(img_path), out_dir, artifacts)
        report["images"].append(entry)

    # 4. report
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    artifacts.append(report_path)

    # 5. manifest
    manifest = {
        "config": _jsonable(cfg.to_dict()),
        "artifacts": sorted(
            (
                {
                    "path": str(a.relative_to(out_dir)),
                    "sha256": _sha256(a),
                    "bytes": a.stat().st_size,
                }
                for a in artifacts
            ),
            key=lambda e: e["path"],
        ),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def _degrade_one(cfg: PipelineConfig, grids, img_path: Path, out_dir: Path,
                 artifacts: list[Path]) -> dict:
    try:
        img = load_png(img_path)
    except Exception as e:
        raise PipelineStageError("load-image", e) from e

    try:
        rows = img.height // cfg.region_px
        cols = img.width // cfg.region_px
        plan = degrade.plan_for_image(img, rows, cols, cfg.boundary, cfg.blend,
                                      cfg.feather_px)
        channel_grids = tuple(psfgrid.resize_grid(g, rows, cols) for g in grids)
        degraded = degrade.degrade_image(img, channel_grids, plan)
    except OptiblurError as e:
        raise PipelineStageError("degrade", e) from e

    out_path = out_dir / f"{img_path.stem}_degraded.png"
    save_png(degraded, out_path)
    artifacts.append(out_path)

    entry = {
        "input": str(img_path),
        "output": out_path.name,
        "grid": [rows, cols],
        "mean_brightness_before": list(degrade.mean_brightness(img)),
        "mean_brightness_after": list(degrade.mean_brightness(degraded)),
    }

    if cfg.rois is not None:
        try:
            rois = load_roi_file(cfg.rois)
            if cfg.annuli is not None:
                part = metrology.AnnulusPartition(
                    (img.width / 2.0, img.height / 2.0), *cfg.annuli)
            else:
                part = metrology.default_annuli(img.width, img.height)
            rep = metrology.region_report(img, degraded, rois, part)
        except OptiblurError as e:
            raise PipelineStageError("mtf", e) from e
        entry["mtf"] = rep.to_dict()
    return entry


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj
