"""Optical materials and dispersion models.

Two models are supported: a constant index (used for AIR) and the
three-term Sellmeier equation

    n^2(lambda) = 1 + sum_i B_i lambda^2 / (lambda^2 - C_i)

with lambda in micrometres and C_i in um^2. The built-in catalog carries
Schott coefficients for the two doublet glasses plus AIR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import MaterialError

# Wavelength band accepted by refractive_index(), nm.
BAND_MIN_NM = 300.0
BAND_MAX_NM = 1100.0


@dataclass(frozen=True)
class Material:
    """A named material with either a constant or a Sellmeier index model.

    For the constant model ``n`` is set and the Sellmeier tuples are empty.
    For the Sellmeier model ``b`` and ``c`` hold (B1, B2, B3) and
    (C1, C2, C3) with C in um^2.
    """

    name: str
    model: str  # "constant" | "sellmeier"
    n: float = 1.0
    b: tuple[float, ...] = field(default=())
    c: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.model not in ("constant", "sellmeier"):
            raise MaterialError(f"unknown dispersion model {self.model!r}")
        if self.model == "constant" and self.n < 1.0:
            raise MaterialError(f"constant index {self.n} < 1.0")
        if self.model == "sellmeier":
            if len(self.b) != len(self.c) or not self.b:
                raise MaterialError("Sellmeier B and C tuples must be equal, nonzero length")
            # The catalog terms must stay physical across the visible band.
            for nm in range(400, 701, 10):
                n = _sellmeier(nm, self.b, self.c)
                if not (1.0 < n < 2.5):
                    raise MaterialError(
                        f"{self.name}: Sellmeier n({nm} nm) = {n:.4f} outside (1.0, 2.5)"
                    )

    def index(self, wavelength_nm: float) -> float:
        return refractive_index(self, wavelength_nm)


def _sellmeier(wavelength_nm: float, b: tuple[float, ...], c: tuple[float, ...]) -> float:
    l2 = (wavelength_nm / 1000.0) ** 2
    n2 = 1.0
    for bi, ci in zip(b, c):
        n2 += bi * l2 / (l2 - ci)
    if n2 <= 0.0:
        raise MaterialError(f"Sellmeier n^2 = {n2:.4f} <= 0 at {wavelength_nm} nm")
    return math.sqrt(n2)


def refractive_index(material: Material, wavelength_nm: float) -> float:
    """n(lambda) for a material; constant model ignores wavelength.

    Raises MaterialError outside the supported 300..1100 nm band.
    """
    if not (BAND_MIN_NM <= wavelength_nm <= BAND_MAX_NM):
        raise MaterialError(
            f"wavelength {wavelength_nm} nm outside supported band "
            f"[{BAND_MIN_NM:.0f}, {BAND_MAX_NM:.0f}] nm"
        )
    if material.model == "constant":
        return material.n
    return _sellmeier(wavelength_nm, material.b, material.c)


# Schott catalog Sellmeier coefficients (lambda in um, C in um^2).
AIR = Material("AIR", "constant", n=1.0)

BK7 = Material(
    "BK7",
    "sellmeier",
    b=(1.03961212, 0.231792344, 1.01046945),
    c=(0.00600069867, 0.0200179144, 103.560653),
)

F2 = Material(
    "F2",
    "sellmeier",
    b=(1.34533359, 0.209073118, 0.937357162),
    c=(0.00997743871, 0.0470450767, 111.886764),
)

CATALOG: dict[str, Material] = {m.name: m for m in (AIR, BK7, F2)}


def lookup(name: str) -> Material:
    """Resolve a material by case-insensitive catalog name.

    Also accepts the literal form ``n=<value>`` for ad-hoc constant media.
    """
    key = name.strip().upper()
    if key in CATALOG:
        return CATALOG[key]
    if key.startswith("N="):
        try:
            return Material(name, "constant", n=float(key[2:]))
        except ValueError:
            pass
    raise MaterialError(f"unknown material {name!r} (catalog: {', '.join(CATALOG)})")
