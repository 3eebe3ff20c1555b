"""Paraxial (first-order) solver: y-nu trace, EFL/BFD, image solve.

The y-nu recurrence per surface with curvature c and indices n1 -> n2:

    u' = (n1 u - y (n2 - n1) c) / n2        (refraction)
    y' = y + t u'                           (transfer by thickness t)

with u the true (not reduced) ray angle. A ray entering parallel to the
axis at unit height gives EFL = -1/u_exit and, from the last refracting
surface, BFD = -y_last/u_exit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ZeroPowerError
from .materials import refractive_index
from .prescription import KIND_REFRACTING, LensPrescription

REFERENCE_WAVELENGTH_NM = 588.0


@dataclass(frozen=True)
class ParaxialSummary:
    effective_focal_length_mm: float
    back_focal_distance_mm: float
    image_space_marginal_angle_rad: float
    focus_z_mm: float          # absolute axial position of the paraxial focus
    image_defocus_mm: float    # focus_z - current image-plane position
    stop_height_per_unit: float  # paraxial stop height for unit entrance height

    @property
    def numerical_aperture(self) -> float:
        return abs(self.image_space_marginal_angle_rad)


def paraxial_solve(p: LensPrescription,
                   wavelength_nm: float = REFERENCE_WAVELENGTH_NM) -> ParaxialSummary:
    """First-order solve of a prescription at one wavelength.

    Raises ZeroPowerError when the system leaves a parallel ray parallel.
    """
    positions = p.axial_positions()
    y, u = 1.0, 0.0
    n1 = refractive_index(p.surfaces[0].material, wavelength_nm)
    y_stop = None
    y_last_refracting = None
    last_refracting_z = None
    # Transfer across the object-space gap happens implicitly: u = 0 there.
    for k, s in enumerate(p.surfaces[1:], start=1):
        n2 = refractive_index(s.material, wavelength_nm)
        if s.kind == KIND_REFRACTING or n2 != n1:
            u = (n1 * u - y * (n2 - n1) * s.curvature) / n2
        if s.kind == KIND_REFRACTING:
            y_last_refracting = y
            last_refracting_z = positions[k]
        if k == p.stop_index:
            y_stop = y
        n1 = n2
        y = y + s.thickness_mm * u

    if abs(u) < 1e-15:
        raise ZeroPowerError("system has no net optical power at this wavelength")
    if y_last_refracting is None or last_refracting_z is None:
        raise ZeroPowerError("no refracting surface in prescription")

    efl = -1.0 / u
    bfd = -y_last_refracting / u
    focus_z = last_refracting_z + bfd
    image_z = positions[-1]

    if y_stop is None or y_stop == 0.0:
        marginal = 0.0
    else:
        marginal = u * (p.stop.semi_diameter_mm / y_stop)

    return ParaxialSummary(
        effective_focal_length_mm=efl,
        back_focal_distance_mm=bfd,
        image_space_marginal_angle_rad=marginal,
        focus_z_mm=focus_z,
        image_defocus_mm=focus_z - image_z,
        stop_height_per_unit=0.0 if y_stop is None else y_stop,
    )


def refocus(p: LensPrescription,
            wavelength_nm: float = REFERENCE_WAVELENGTH_NM) -> LensPrescription:
    """Move the image plane to the paraxial focus at the given wavelength."""
    summary = paraxial_solve(p, wavelength_nm)
    return p.with_image_shift(summary.image_defocus_mm)
