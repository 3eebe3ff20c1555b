"""Quantitative checks: PSF RMSE, radial-annulus MTF50 reports, test charts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import ChartError, DimensionMismatchError, OptiblurError
from .image import RasterImage
from .psf import PSF
from .psfio import load_psf as load_reference_psf  # re-export, import path for external PSFs
from .sfr import EdgeROI, SFRCurve, esfr, mtf50

__all__ = [
    "rmse", "load_reference_psf", "AnnulusPartition", "partition_rois",
    "RoiMeasurement", "MTFReport", "region_report", "make_test_chart",
    "default_annuli",
]

REGIONS = ("center", "middle", "edge")


def rmse(a: PSF, b: PSF, normalization: str = "peak") -> float:
    """Root-mean-square difference of two equally sized PSFs.

    Both arrays are first normalized per the chosen convention:
    "peak" scales each to unit maximum, "sum" to unit total.
    """
    if a.intensity.shape != b.intensity.shape:
        raise DimensionMismatchError(
            f"PSF dims differ: {a.intensity.shape} vs {b.intensity.shape}"
        )
    if normalization not in ("peak", "sum"):
        raise OptiblurError("normalization must be 'peak' or 'sum'")

    def norm(v: np.ndarray) -> np.ndarray:
        scale = v.max() if normalization == "peak" else v.sum()
        return v / scale if scale > 0 else v

    va, vb = norm(a.intensity), norm(b.intensity)
    return float(np.sqrt(np.mean((va - vb) ** 2)))


@dataclass(frozen=True)
class AnnulusPartition:
    """Two radii splitting the image into center / middle / edge annuli."""

    center: tuple[float, float]
    r1: float
    r2: float

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2):
            raise OptiblurError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")

    def label(self, point: tuple[float, float]) -> str:
        r = math.hypot(point[0] - self.center[0], point[1] - self.center[1])
        if r <= self.r1:  # closed inner boundary: a centroid exactly on r1 is "center"
            return "center"
        if r <= self.r2:
            return "middle"
        return "edge"


def default_annuli(width: int, height: int) -> AnnulusPartition:
    """r1 = 0.35 R, r2 = 0.72 R with R the image half-diagonal."""
    R = math.hypot(width / 2.0, height / 2.0)
    return AnnulusPartition((width / 2.0, height / 2.0), 0.35 * R, 0.72 * R)


def partition_rois(rois: list[EdgeROI], part: AnnulusPartition) -> list[EdgeROI]:
    """Label each ROI with the annulus containing its centroid."""
    return [replace(roi, region=part.label(roi.centroid)) for roi in rois]


@dataclass
class RoiMeasurement:
    roi: EdgeROI
    region: str
    mtf50_before: float | None
    mtf50_after: float | None
    error: str | None = None

    @property
    def delta(self) -> float | None:
        if self.mtf50_before is None or self.mtf50_after is None:
            return None
        return self.mtf50_after - self.mtf50_before

    @property
    def above_nyquist(self) -> bool:
        # Synthetic supersampled edges can resolve past 0.5 cy/px; flagged.
        vals = [v for v in (self.mtf50_before, self.mtf50_after) if v is not None]
        return any(v > 0.5 for v in vals)


@dataclass
class MTFReport:
    measurements: list[RoiMeasurement]
    region_means_before: dict[str, float]
    region_means_after: dict[str, float]

    def region_delta(self, region: str) -> float:
        return self.region_means_after[region] - self.region_means_before[region]

    @property
    def errors(self) -> list[str]:
        return [f"ROI ({m.roi.x},{m.roi.y}): {m.error}" for m in self.measurements if m.error]

    def to_dict(self) -> dict:
        return {
            "rois": [
                {
                    "x": m.roi.x, "y": m.roi.y, "w": m.roi.w, "h": m.roi.h,
                    "region": m.region,
                    "mtf50_before_cypx": m.mtf50_before,
                    "mtf50_after_cypx": m.mtf50_after,
                    "delta_cypx": m.delta,
                    "above_nyquist": m.above_nyquist,
                    "error": m.error,
                }
                for m in self.measurements
            ],
            "region_means_before_cypx": self.region_means_before,
            "region_means_after_cypx": self.region_means_after,
            "region_deltas_cypx": {
                r: self.region_means_after[r] - self.region_means_before[r]
                for r in self.region_means_before
                if r in self.region_means_after
            },
        }


def _measure(channel: np.ndarray, roi: EdgeROI, oversample: int) -> float:
    return mtf50(esfr(channel, roi, oversample=oversample))


def region_report(before: RasterImage, after: RasterImage, rois: list[EdgeROI],
                  part: AnnulusPartition, oversample: int = 4) -> MTFReport:
    """Per-ROI and per-region MTF50 of two images plus deltas.

    Failing ROIs are reported by message and skipped in the means; the
    report is still produced for the valid ones.
    """
    if (before.width, before.height) != (after.width, after.height):
        raise DimensionMismatchError("before/after image sizes differ")
    labeled = partition_rois(rois, part)
    luma_b = before.luminance()
    luma_a = after.luminance()
    out: list[RoiMeasurement] = []
    for roi in labeled:
        try:
            vb = _measure(luma_b, roi, oversample)
            va = _measure(luma_a, roi, oversample)
            out.append(RoiMeasurement(roi, roi.region, vb, va))
        except OptiblurError as e:
            out.append(RoiMeasurement(roi, roi.region, None, None, error=str(e)))

    means_b: dict[str, float] = {}
    means_a: dict[str, float] = {}
    for region in REGIONS:
        vb = [m.mtf50_before for m in out if m.region == region and m.error is None]
        va = [m.mtf50_after for m in out if m.region == region and m.error is None]
        if vb:
            means_b[region] = float(np.mean(vb))
            means_a[region] = float(np.mean(va))
    return MTFReport(out, means_b, means_a)


def make_test_chart(width: int, height: int,
                    edges: list[tuple[tuple[float, float], float, str]],
                    patch_size: tuple[int, int] = (120, 80),
                    dark: float = 0.2, light: float = 0.8,
                    background: float = 0.5,
                    edge_blur_px: float = 0.0) -> RasterImage:
    """Gray chart of slanted-edge patches at the given centres.

    Each edge is ((cx, cy), angle_deg_from_vertical, polarity). Patches
    must not overlap. With edge_blur_px > 0 the step is rendered as a
    Gaussian-blurred profile of that sigma, giving the chart a finite,
    known baseline sharpness.
    """
    if width < 1 or height < 1:
        raise ChartError("chart dimensions must be positive")
    pw, ph = patch_size
    canvas = np.full((height, width), float(background), dtype=np.float64)

    boxes = []
    for (cx, cy), angle, polarity in edges:
        x0, y0 = int(round(cx - pw / 2)), int(round(cy - ph / 2))
        box = (x0, y0, x0 + pw, y0 + ph)
        if x0 < 0 or y0 < 0 or box[2] > width or box[3] > height:
            raise ChartError(f"patch at ({cx}, {cy}) exceeds the chart bounds")
        for other in boxes:
            if box[0] < other[2] and other[0] < box[2] and box[1] < other[3] and other[1] < box[3]:
                raise ChartError(f"patch at ({cx}, {cy}) overlaps another patch")
        boxes.append(box)

        yy, xx = np.mgrid[box[1]:box[3], box[0]:box[2]]
        slope = math.tan(math.radians(angle))
        cos_t = 1.0 / math.sqrt(1.0 + slope * slope)
        dist = ((xx + 0.5) - cx - slope * ((yy + 0.5) - cy)) * cos_t
        if edge_blur_px > 0:
            prof = 0.5 * (1.0 + special.erf(dist / (edge_blur_px * math.sqrt(2.0))))
        else:
            prof = (dist >= 0.0).astype(np.float64)
        if polarity == "falling":
            prof = 1.0 - prof
        elif polarity != "rising":
            raise ChartError(f"polarity must be 'rising' or 'falling', got {polarity!r}")
        canvas[box[1]:box[3], box[0]:box[2]] = dark + (light - dark) * prof

    return RasterImage.from_gray(canvas.astype(np.float32))


def chart_rois(edges: list[tuple[tuple[float, float], float, str]],
               roi_size: tuple[int, int] = (100, 64)) -> list[EdgeROI]:
    """ROIs centred on each chart edge (convenience for synthetic charts)."""
    rw, rh = roi_size
    return [
        EdgeROI(int(round(cx - rw / 2)), int(round(cy - rh / 2)), rw, rh, polarity)
        for (cx, cy), _angle, polarity in edges
    ]
