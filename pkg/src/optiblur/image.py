"""RGB raster images in [0, 1] float with PNG load/save."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DimensionMismatchError

LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)  # Rec. 709


@dataclass
class RasterImage:
    """H x W x 3 float image, all samples in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[2] != 3:
            raise DimensionMismatchError(f"expected H x W x 3 array, got {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionMismatchError("image must be at least 1 x 1")
        if v.dtype not in (np.float32, np.float64):
            v = v.astype(np.float32)
        lo, hi = float(v.min()), float(v.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"image values outside [0, 1]: min {lo}, max {hi}")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def channel(self, index: int) -> np.ndarray:
        return self.values[:, :, index]

    def luminance(self) -> np.ndarray:
        w = LUMA_WEIGHTS
        v = self.values
        return w[0] * v[:, :, 0] + w[1] * v[:, :, 1] + w[2] * v[:, :, 2]

    @staticmethod
    def from_gray(gray: np.ndarray) -> "RasterImage":
        g = np.asarray(gray, dtype=np.float32)
        return RasterImage(np.repeat(g[:, :, None], 3, axis=2))


def load_png(path) -> RasterImage:
    """Read an 8- or 16-bit PNG; integer values are linearized by range division."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read image {path}")
    if raw.dtype == np.uint8:
        v = raw.astype(np.float32) / 255.0
    elif raw.dtype == np.uint16:
        v = raw.astype(np.float32) / 65535.0
    else:
        v = np.clip(raw.astype(np.float32), 0.0, 1.0)
    if v.ndim == 2:
        v = np.repeat(v[:, :, None], 3, axis=2)
    elif v.shape[2] == 4:
        v = v[:, :, :3]
    v = v[:, :, ::-1].copy()  # BGR -> RGB
    return RasterImage(v)


def save_png(img: RasterImage, path, bit_depth: int = 8) -> None:
    if bit_depth == 8:
        enc = np.round(img.values * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        enc = np.round(img.values.astype(np.float64) * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    ok = cv2.imwrite(str(path), np.ascontiguousarray(enc[:, :, ::-1]))
    if not ok:
        raise IOError(f"cannot write image {path}")


def save_gray_png16(gray01: np.ndarray, path) -> None:
    """16-bit single-channel PNG of a [0, 1] array (PSF previews)."""
    enc = np.round(np.clip(np.asarray(gray01, dtype=np.float64), 0, 1) * 65535.0).astype(np.uint16)
    ok = cv2.imwrite(str(path), enc)
    if not ok:
        raise IOError(f"cannot write image {path}")
