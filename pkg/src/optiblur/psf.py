"""Exit-pupil OPD maps from traced bundles and Fraunhofer diffraction PSFs.

The optical path difference of a ray is measured against a reference
sphere centred on the chief ray's image-plane hit and passing through the
exit-pupil centre: each ray's accumulated path is truncated where the ray
crosses that sphere, and the chief ray defines the zero.

The far-field intensity is |FFT(A exp(-i 2 pi W / lambda))|^2 on a
zero-padded pupil grid; the image-plane sample pitch follows from the
exit-pupil sample pitch, the pupil-to-image distance and the pad factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ChiefRayError, DimensionMismatchError, EmptyPupilError
from .prescription import LensPrescription
from .raytrace import BundleTrace, RayPath, find_chief, trace_bundle


@dataclass
class PupilFunction:
    """Binary pupil transmission plus OPD (mm) on an N x N grid.

    The grid is parametrized by the first-surface footprint; `exit_pitch_mm`
    is the equivalent sample pitch at the exit pupil (stop) and
    `focal_distance_mm` the exit pupil to image distance, both needed to
    scale the diffraction pattern.
    """

    amplitude: np.ndarray
    opd_mm: np.ndarray
    wavelength_nm: float
    field_deg: tuple[float, float]
    sample_pitch_mm: float
    exit_pitch_mm: float
    focal_distance_mm: float
    chief_image_xy: tuple[float, float]

    @property
    def n(self) -> int:
        return self.amplitude.shape[0]

    @property
    def support_count(self) -> int:
        return int(self.amplitude.sum())

    @property
    def exit_diameter_mm(self) -> float:
        """Diameter of the transmitting support measured at the exit pupil."""
        cols = np.where(self.amplitude.any(axis=0))[0]
        return float((cols.max() - cols.min() + 1) * self.exit_pitch_mm)


@dataclass
class PSF:
    """Normalized point-spread intensity on a square image-plane grid.

    ``crop_offset_px`` records where the window centre sits relative to
    the chief-ray image point (DC), in FFT samples; centroid-recentred
    crops make it nonzero for comatic field points.
    """

    intensity: np.ndarray
    pixel_pitch_um: float
    wavelength_nm: float
    field_deg: tuple[float, float] = (0.0, 0.0)
    crop_offset_px: tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.intensity.ndim != 2:
            raise DimensionMismatchError("PSF intensity must be 2-D")

    @property
    def size(self) -> int:
        return self.intensity.shape[0]

    def normalized(self) -> "PSF":
        total = self.intensity.sum()
        if total <= 0:
            raise EmptyPupilError("PSF has no energy")
        return PSF(self.intensity / total, self.pixel_pitch_um,
                   self.wavelength_nm, self.field_deg)


def _sphere_exit_path(points: np.ndarray, directions: np.ndarray,
                      center: np.ndarray, radius: float) -> np.ndarray:
    """Backward distance from image-plane points to the reference sphere."""
    pc = points - center
    bh = np.einsum("ij,ij->i", directions, pc)
    c = np.einsum("ij,ij->i", pc, pc) - radius * radius
    return bh + np.sqrt(np.clip(bh * bh - c, 0.0, None))


def opd_map(bundle: BundleTrace, chief: RayPath) -> PupilFunction:
    """OPD of every surviving bundle ray relative to the chief ray.

    Vignetted rays get amplitude 0. The chief must have reached the image.
    """
    if not chief.reached_image:
        raise ChiefRayError(f"chief ray terminated: {chief.status_name}")
    m = len(bundle)
    n = int(round(math.sqrt(m)))
    if n * n != m:
        raise DimensionMismatchError(f"bundle of {m} rays is not a square grid")

    p = bundle.prescription
    positions = p.axial_positions()
    exit_center = np.array([0.0, 0.0, positions[p.stop_index]])
    chief_img = chief.image_point
    r_ref = float(np.linalg.norm(chief_img - exit_center))

    alive = bundle.alive
    img_pts = bundle.hits[-1]
    t_back = np.zeros(m)
    t_back[alive] = _sphere_exit_path(img_pts[alive], bundle.direction_out[alive],
                                      chief_img, r_ref)
    raw = bundle.opl - t_back
    t_chief = _sphere_exit_path(chief_img[None, :], chief.direction_out[None, :],
                                chief_img, r_ref)[0]
    raw_chief = chief.opl - t_chief
    opd = np.where(alive, raw - raw_chief, 0.0)

    amplitude = alive.reshape(n, n).astype(float)
    if amplitude.sum() == 0:
        raise EmptyPupilError("no rays survive to the image plane")
    opd_grid = opd.reshape(n, n)

    # Footprint sample pitch (uniform grid) and its exit-pupil equivalent,
    # fitted from the stop-plane hits of the surviving rays.
    fp = bundle.entrance_xy
    pitch = _grid_pitch(fp, n)
    chief_fp = chief.hits[p.first_refracting().index - 1].point[:2]
    d_fp = fp[alive] - chief_fp
    denom = float((d_fp * d_fp).sum())
    if denom > 0:
        mag = float((bundle.stop_xy[alive] * d_fp).sum() / denom)
    else:
        from .paraxial import paraxial_solve  # single-ray fallback

        mag = paraxial_solve(p, bundle.wavelength_nm).stop_height_per_unit
    return PupilFunction(
        amplitude=amplitude,
        opd_mm=opd_grid,
        wavelength_nm=bundle.wavelength_nm,
        field_deg=bundle.field_deg,
        sample_pitch_mm=pitch,
        exit_pitch_mm=abs(mag) * pitch,
        focal_distance_mm=r_ref,
        chief_image_xy=(float(chief_img[0]), float(chief_img[1])),
    )


def _grid_pitch(fp: np.ndarray, n: int) -> float:
    if n == 1:
        return 1.0
    xs = np.unique(fp[:, 0])
    return float(xs[1] - xs[0])


def build_pupil(p: LensPrescription, theta_x_deg: float, theta_y_deg: float,
                wavelength_nm: float, pupil_samples: int = 128) -> PupilFunction:
    """Trace a field bundle plus its chief ray and assemble the pupil."""
    bundle = trace_bundle(p, theta_y_deg, wavelength_nm, pupil_samples,
                          theta_x_deg=theta_x_deg)
    chief, _ = find_chief(p, theta_x_deg, theta_y_deg, wavelength_nm)
    return opd_map(bundle, chief)


def fraunhofer_psf(pupil: PupilFunction, pad_factor: int = 4, out_size: int = 160,
                   pixel_pitch_um: float | None = None,
                   recenter: str = "centroid") -> PSF:
    """Far-field PSF of a pupil function, cropped or resampled to out_size.

    With pixel_pitch_um unset the native FFT pitch
    lambda * R / (pad * N * exit_pitch) is kept; otherwise the intensity
    is bilinearly resampled onto the requested pitch and renormalized.

    recenter="centroid" places the output window on the intensity
    centroid so comatic flare stays inside the finite window and kernels
    carry no net content shift (lateral displacement is geometry, not
    blur); recenter="dc" pins the window on the chief-ray image point.
    """
    if pad_factor < 1:
        raise ValueError(f"pad_factor {pad_factor} < 1")
    if recenter not in ("centroid", "dc"):
        raise ValueError("recenter must be 'centroid' or 'dc'")
    if pupil.support_count == 0:
        raise EmptyPupilError("pupil has empty support")

    n = pupil.n
    big = pad_factor * n
    if out_size > big:
        raise DimensionMismatchError(
            f"out_size {out_size} exceeds padded FFT grid {big}; raise pad_factor"
        )
    lam_mm = pupil.wavelength_nm * 1e-6
    field = pupil.amplitude * np.exp(-2j * np.pi * pupil.opd_mm / lam_mm)
    intensity = np.abs(np.fft.fftshift(np.fft.fft2(field, s=(big, big)))) ** 2
    native_pitch_um = lam_mm * pupil.focal_distance_mm / (big * pupil.exit_pitch_mm) * 1000.0

    c = big // 2
    if recenter == "centroid":
        idx = np.arange(big, dtype=float)
        total = intensity.sum()
        cy = int(np.round((intensity.sum(axis=1) * idx).sum() / total))
        cx = int(np.round((intensity.sum(axis=0) * idx).sum() / total))
    else:
        cy = cx = c
    h = out_size // 2
    # Keep the window inside the FFT grid.
    cy = min(max(cy, h), big - out_size + h)
    cx = min(max(cx, h), big - out_size + h)

    if pixel_pitch_um is None or pixel_pitch_um == native_pitch_um:
        win = intensity[cy - h:cy - h + out_size, cx - h:cx - h + out_size]
        pitch = native_pitch_um
    else:
        scale = pixel_pitch_um / native_pitch_um
        offs = (np.arange(out_size) - h) * scale
        gy, gx = np.meshgrid(offs + cy, offs + cx, indexing="ij")
        win = ndimage.map_coordinates(intensity, [gy, gx], order=1, mode="constant")
        pitch = pixel_pitch_um

    total = win.sum()
    if total <= 0:
        raise EmptyPupilError("cropped PSF window holds no energy")
    return PSF(win / total, pitch, pupil.wavelength_nm, pupil.field_deg,
               crop_offset_px=(cy - c, cx - c))


# ---------------------------------------------------------------------------
# PSF analysis helpers


def psf_centroid_um(psf: PSF) -> tuple[float, float]:
    """Intensity centroid relative to the window centre, (x_um, y_um)."""
    size = psf.size
    idx = np.arange(size) - size // 2
    total = psf.intensity.sum()
    cy = float((psf.intensity.sum(axis=1) * idx).sum() / total)
    cx = float((psf.intensity.sum(axis=0) * idx).sum() / total)
    return cx * psf.pixel_pitch_um, cy * psf.pixel_pitch_um


def encircled_energy(psf: PSF, radius_um: float,
                     center_px: tuple[float, float] | None = None) -> float:
    """Fraction of total energy inside a circle around the window centre."""
    size = psf.size
    if center_px is None:
        center_px = (size // 2, size // 2)
    y, x = np.mgrid[0:size, 0:size]
    r = np.hypot(x - center_px[1], y - center_px[0]) * psf.pixel_pitch_um
    return float(psf.intensity[r <= radius_um].sum() / psf.intensity.sum())


def ring_to_peak_ratio(psf: PSF, core_radius_um: float) -> float:
    """Energy outside the core circle divided by energy inside it."""
    inside = encircled_energy(psf, core_radius_um)
    if inside <= 0:
        return math.inf
    return (1.0 - inside) / inside


def airy_first_zero_um(wavelength_nm: float, focal_distance_mm: float,
                       aperture_diameter_mm: float) -> float:
    """First dark-ring radius 1.22 lambda R / D of an unaberrated circular pupil."""
    return 1.22 * (wavelength_nm * 1e-6) * focal_distance_mm / aperture_diameter_mm * 1000.0


def radial_profile(psf: PSF, step_px: float = 0.25, max_radius_px: float | None = None):
    """Interpolated azimuthal-average profile, (radii_um, values)."""
    size = psf.size
    c = size // 2
    if max_radius_px is None:
        max_radius_px = c - 1
    radii = np.arange(0.0, max_radius_px, step_px)
    angles = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    ys = c + rr * np.sin(aa)
    xs = c + rr * np.cos(aa)
    vals = ndimage.map_coordinates(psf.intensity, [ys, xs], order=1).mean(axis=1)
    return radii * psf.pixel_pitch_um, vals


def first_minimum_radius_um(psf: PSF, step_px: float = 0.05) -> float:
    """Radius of the first local minimum of the azimuthal-average profile."""
    radii, vals = radial_profile(psf, step_px=step_px)
    for k in range(1, len(vals) - 1):
        if vals[k] < vals[k - 1] and vals[k] <= vals[k + 1]:
            return float(radii[k])
    raise EmptyPupilError("no local minimum found in radial profile")
