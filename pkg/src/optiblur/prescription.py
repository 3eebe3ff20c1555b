"""Lens prescription model: ordered surface tables with validation.

File grammar (one surface per line, ``#`` starts a comment)::

    wavelengths: 656 531 486
    field_angles: -2 0 2
    0 P_Obj AIR 100.000 30.000 0.000
    1 Surface_1 BK7 6.000 30.000 92.847
    ...

Columns are ``index name material thickness_mm diameter_mm radius_mm``.
The file stores full diameters; semi-diameters are derived internally.
A radius of 0.000 encodes a planar surface. The first surface is the
object plane, the last is the image plane, and exactly one surface whose
name contains "stop" (case-insensitive) is the aperture stop.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources

from . import materials
from .errors import PrescriptionParseError, PrescriptionValidationError
from .materials import Material

KIND_OBJECT = "object"
KIND_REFRACTING = "refracting"
KIND_STOP = "stop"
KIND_IMAGE = "image"


@dataclass(frozen=True)
class Surface:
    """One row of the surface table.

    ``material`` is the medium *after* the surface; ``thickness_mm`` is the
    axial gap to the next surface. ``radius_mm == 0`` means planar.
    """

    index: int
    name: str
    kind: str
    radius_mm: float
    thickness_mm: float
    semi_diameter_mm: float
    material: Material

    def __post_init__(self):
        # Names must survive a whitespace-separated round trip.
        object.__setattr__(self, "name", re.sub(r"\s+", "_", self.name.strip()))

    @property
    def is_planar(self) -> bool:
        return self.radius_mm == 0.0

    @property
    def curvature(self) -> float:
        return 0.0 if self.radius_mm == 0.0 else 1.0 / self.radius_mm


@dataclass(frozen=True)
class LensPrescription:
    """An immutable, validated sequential optical system."""

    surfaces: tuple[Surface, ...]
    wavelengths_nm: tuple[float, ...]
    field_angles_deg: tuple[float, ...]

    def __post_init__(self):
        validate_surfaces(self.surfaces)

    @property
    def stop_index(self) -> int:
        return next(i for i, s in enumerate(self.surfaces) if s.kind == KIND_STOP)

    @property
    def stop(self) -> Surface:
        return self.surfaces[self.stop_index]

    @property
    def image(self) -> Surface:
        return self.surfaces[-1]

    def axial_positions(self) -> list[float]:
        return axial_positions(self.surfaces)

    def vertex_z(self, index: int) -> float:
        return self.axial_positions()[index]

    def first_refracting(self) -> Surface:
        return next(s for s in self.surfaces if s.kind == KIND_REFRACTING)

    def with_image_shift(self, dz_mm: float) -> "LensPrescription":
        """New prescription with the image plane moved by dz along the axis.

        The gap between the second-to-last surface and the image absorbs
        the shift; it must stay nonnegative.
        """
        pre = self.surfaces[-2]
        new_gap = pre.thickness_mm + dz_mm
        if new_gap < 0:
            raise PrescriptionValidationError(
                f"image shift {dz_mm} mm would make the last gap negative"
            )
        surfs = self.surfaces[:-2] + (replace(pre, thickness_mm=new_gap), self.surfaces[-1])
        return LensPrescription(surfs, self.wavelengths_nm, self.field_angles_deg)


def axial_positions(surfaces) -> list[float]:
    """Cumulative vertex positions: position[i] = sum(thickness[0..i-1])."""
    if hasattr(surfaces, "surfaces"):
        surfaces = surfaces.surfaces
    z = 0.0
    out = []
    for s in surfaces:
        out.append(z)
        z += s.thickness_mm
    return out


def validate_surfaces(surfaces: tuple[Surface, ...]) -> None:
    if len(surfaces) < 2:
        raise PrescriptionValidationError("a prescription needs at least object and image surfaces")
    if surfaces[0].kind != KIND_OBJECT:
        raise PrescriptionValidationError("first surface kind must be 'object'")
    if surfaces[-1].kind != KIND_IMAGE:
        raise PrescriptionValidationError("last surface kind must be 'image'")
    stops = [s for s in surfaces if s.kind == KIND_STOP]
    if len(stops) != 1:
        raise PrescriptionValidationError(f"exactly one aperture stop required, found {len(stops)}")
    for s in surfaces:
        if s.kind in (KIND_OBJECT, KIND_IMAGE) and s is not surfaces[0] and s is not surfaces[-1]:
            raise PrescriptionValidationError(f"surface {s.index}: interior surface marked {s.kind}")
        if s.thickness_mm < 0:
            raise PrescriptionValidationError(
                f"surface {s.index} ({s.name}): thickness {s.thickness_mm} < 0"
            )
        if s.semi_diameter_mm <= 0:
            raise PrescriptionValidationError(
                f"surface {s.index} ({s.name}): semi-diameter must be > 0"
            )
    if surfaces[-1].thickness_mm != 0.0:
        raise PrescriptionValidationError("image surface thickness must be 0")
    pos = axial_positions(surfaces)
    for a, b, s in zip(pos, pos[1:], surfaces[1:]):
        if b <= a:
            raise PrescriptionValidationError(
                f"surface {s.index} ({s.name}): axial positions must be strictly increasing"
            )


def _kind_for(row: int, nrows: int, name: str) -> str:
    if row == 0:
        return KIND_OBJECT
    if row == nrows - 1:
        return KIND_IMAGE
    if "stop" in name.lower():
        return KIND_STOP
    return KIND_REFRACTING


def parse_prescription(text: str) -> LensPrescription:
    """Parse prescription-file contents into a validated LensPrescription."""
    wavelengths: list[float] = []
    field_angles: list[float] = []
    rows: list[tuple[int, list[str]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low.startswith("wavelengths"):
            wavelengths = _parse_header_numbers(line, lineno)
            continue
        if low.startswith("field_angles"):
            field_angles = _parse_header_numbers(line, lineno)
            continue
        cols = line.split()
        if len(cols) != 6:
            raise PrescriptionParseError(
                f"expected 6 columns (index name material thickness diameter radius), got {len(cols)}",
                lineno,
            )
        rows.append((lineno, cols))

    if not rows:
        raise PrescriptionParseError("no surface rows found")

    surfaces = []
    for row, (lineno, cols) in enumerate(rows):
        try:
            index = int(cols[0])
            thickness = float(cols[3])
            diameter = float(cols[4])
            radius = float(cols[5])
        except ValueError as e:
            raise PrescriptionParseError(str(e), lineno) from None
        if index != row:
            raise PrescriptionParseError(f"surface index {index} out of order (expected {row})", lineno)
        try:
            mat = materials.lookup(cols[2])
        except Exception as e:
            raise PrescriptionParseError(str(e), lineno) from None
        surfaces.append(
            Surface(
                index=index,
                name=cols[1],
                kind=_kind_for(row, len(rows), cols[1]),
                radius_mm=radius,
                thickness_mm=thickness,
                semi_diameter_mm=diameter / 2.0,
                material=mat,
            )
        )

    return LensPrescription(tuple(surfaces), tuple(wavelengths), tuple(field_angles))


def _parse_header_numbers(line: str, lineno: int) -> list[float]:
    body = line.split(":", 1)[1] if ":" in line else line.split(None, 1)[1]
    try:
        return [float(tok) for tok in body.replace(",", " ").split()]
    except (ValueError, IndexError):
        raise PrescriptionParseError("malformed header numbers", lineno) from None


def serialize_prescription(p: LensPrescription) -> str:
    """Inverse of parse_prescription; parse(serialize(p)) == p."""
    lines = []
    if p.wavelengths_nm:
        lines.append("wavelengths: " + " ".join(repr(w) for w in p.wavelengths_nm))
    if p.field_angles_deg:
        lines.append("field_angles: " + " ".join(repr(a) for a in p.field_angles_deg))
    lines.append("# index name material thickness_mm diameter_mm radius_mm")
    for s in p.surfaces:
        lines.append(
            f"{s.index} {s.name} {s.material.name} "
            f"{s.thickness_mm!r} {s.semi_diameter_mm * 2.0!r} {s.radius_mm!r}"
        )
    return "\n".join(lines) + "\n"


def load_prescription(path) -> LensPrescription:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_prescription(fh.read())


def doublet() -> LensPrescription:
    """The packaged two-element reference lens (data/doublet.lens)."""
    text = resources.files(__package__).joinpath("data/doublet.lens").read_text()
    return parse_prescription(text)
