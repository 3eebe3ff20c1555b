"""Exact sequential ray tracing through spherical/planar surfaces.

All geometry is in millimetres with z along the optical axis. The trace
is vectorized: a bundle is a structure-of-arrays (`BundleTrace`) that can
also be indexed like a list of per-ray `RayPath` records.

Sphere intersection uses the numerically stable quadratic (the root pair
is derived from q = -(b + sign(b) sqrt(disc)) to avoid cancellation) and
selects the root on the vertex cap of the sphere, i.e. the intersection
satisfying (z_hit - z_center) * R < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChiefRayError, DegenerateBundleError, TraceError
from .materials import refractive_index
from .prescription import KIND_REFRACTING, LensPrescription, Surface

# Terminal status codes (per ray).
REACHED_IMAGE = 0
VIGNETTED = 1
TIR = 2
MISSED = 3

STATUS_NAMES = {
    REACHED_IMAGE: "reached_image",
    VIGNETTED: "vignetted",
    TIR: "total_internal_reflection",
    MISSED: "missed",
}

_T_EPS = 1e-9  # minimum propagation distance, mm


class TotalInternalReflectionError(TraceError):
    pass


@dataclass
class Ray:
    """Ray state: position (mm), unit direction, wavelength, path length."""

    position: np.ndarray
    direction: np.ndarray
    wavelength_nm: float
    opl: float = 0.0
    alive: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.direction = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(self.direction)
        if abs(norm - 1.0) > 1e-12:
            self.direction = self.direction / norm


@dataclass
class SurfaceHit:
    surface: int
    point: np.ndarray
    normal: np.ndarray
    incidence_rad: float
    refraction_rad: float


@dataclass
class RayPath:
    """Per-surface hit records of one traced ray, ordered by surface index."""

    wavelength_nm: float
    hits: list[SurfaceHit]
    status: int
    fail_surface: int | None
    opl: float
    direction_out: np.ndarray

    @property
    def reached_image(self) -> bool:
        return self.status == REACHED_IMAGE

    @property
    def status_name(self) -> str:
        return STATUS_NAMES[self.status]

    @property
    def image_point(self) -> np.ndarray:
        if not self.reached_image:
            raise TraceError(f"ray terminated: {self.status_name} at surface {self.fail_surface}")
        return self.hits[-1].point


def refract(direction: np.ndarray, normal: np.ndarray, n1: float, n2: float) -> np.ndarray:
    """Snell's law in vector form. `normal` must oppose `direction`.

    Raises TotalInternalReflectionError when n1 sin(i) / n2 > 1.
    """
    d = np.asarray(direction, dtype=float)
    n = np.asarray(normal, dtype=float)
    mu = n1 / n2
    cos_i = -float(np.dot(d, n))
    sin2_t = mu * mu * (1.0 - cos_i * cos_i)
    if sin2_t > 1.0:
        raise TotalInternalReflectionError(
            f"TIR: n1 sin(i) = {n1 * math.sqrt(max(0.0, 1 - cos_i**2)):.6f} > n2 = {n2}"
        )
    cos_t = math.sqrt(1.0 - sin2_t)
    out = mu * d + (mu * cos_i - cos_t) * n
    return out / np.linalg.norm(out)


def intersect(ray: Ray, surface: Surface, vertex_z: float):
    """Intersect a single ray with a surface at the given vertex position.

    Returns (point, normal, vignetted) or None when there is no forward
    intersection. The normal is unit length and oriented against the ray.
    """
    P = ray.position[None, :]
    D = ray.direction[None, :]
    X, N, t, ok = _intersect_arrays(P, D, surface.radius_mm, vertex_z)
    if not ok[0]:
        return None
    r = math.hypot(X[0, 0], X[0, 1])
    return X[0], N[0], r > surface.semi_diameter_mm


def _intersect_arrays(P, D, radius: float, vertex_z: float):
    """Vectorized surface intersection. Returns (points, normals, t, ok)."""
    M = P.shape[0]
    if radius == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (vertex_z - P[:, 2]) / D[:, 2]
        ok = np.isfinite(t) & (t > _T_EPS)
        X = P + t[:, None] * D
        N = np.zeros_like(P)
        N[:, 2] = -np.sign(D[:, 2])
        return X, N, t, ok

    zc = vertex_z + radius
    PC = P - np.array([0.0, 0.0, zc])
    bh = np.einsum("ij,ij->i", D, PC)
    c = np.einsum("ij,ij->i", PC, PC) - radius * radius
    disc = bh * bh - c
    has_root = disc >= 0.0
    sq = np.sqrt(np.where(has_root, disc, 0.0))
    # Stable pair: q and c/q instead of -bh +/- sq.
    sgn = np.where(bh >= 0.0, 1.0, -1.0)
    q = -(bh + sgn * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = q
        t2 = np.where(q != 0.0, c / q, sq)  # bh == 0 edge case
    t_pair = np.stack([t1, t2], axis=1)
    z_hit = P[:, 2, None] + t_pair * D[:, 2, None]
    on_cap = (z_hit - zc) * radius < 0.0
    valid = has_root[:, None] & on_cap & (t_pair > _T_EPS)
    t_pair = np.where(valid, t_pair, np.inf)
    t = t_pair.min(axis=1)
    ok = np.isfinite(t)
    t = np.where(ok, t, 0.0)
    X = P + t[:, None] * D
    N = (X - np.array([0.0, 0.0, zc])) / radius
    flip = np.einsum("ij,ij->i", N, D) > 0.0
    N[flip] *= -1.0
    return X, N, t, ok


@dataclass
class BundleTrace:
    """Structure-of-arrays result of tracing M rays through K surfaces.

    Behaves as a sequence of RayPath. Surface axis covers prescription
    surfaces 1..K (the object plane is the launch plane).
    """

    prescription: LensPrescription
    wavelength_nm: float
    launch: np.ndarray        # (M, 3)
    entrance_xy: np.ndarray   # (M, 2) grid coords on the first-surface footprint
    hits: np.ndarray          # (S, M, 3), NaN once a ray is dead
    normals: np.ndarray       # (S, M, 3)
    cos_inc: np.ndarray       # (S, M)
    cos_ref: np.ndarray       # (S, M)
    dirs_after: np.ndarray    # (S, M, 3) direction after each surface
    opl_at: np.ndarray        # (S, M) accumulated path length at each hit
    direction_out: np.ndarray  # (M, 3)
    opl: np.ndarray           # (M,)
    status: np.ndarray        # (M,) int8
    fail_surface: np.ndarray  # (M,) int16, -1 if none
    field_deg: tuple[float, float] = (0.0, 0.0)

    @property
    def alive(self) -> np.ndarray:
        return self.status == REACHED_IMAGE

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    def surface_hits(self, surface_index: int) -> np.ndarray:
        return self.hits[surface_index - 1]

    @property
    def stop_xy(self) -> np.ndarray:
        return self.hits[self.prescription.stop_index - 1, :, :2]

    @property
    def image_xy(self) -> np.ndarray:
        return self.hits[-1, :, :2]

    def __len__(self) -> int:
        return self.launch.shape[0]

    def __getitem__(self, i: int) -> RayPath:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = i % len(self)
        fail = int(self.fail_surface[i])
        hits = []
        for k in range(self.hits.shape[0]):
            if not np.isfinite(self.hits[k, i, 0]):
                break
            hits.append(
                SurfaceHit(
                    surface=k + 1,
                    point=self.hits[k, i].copy(),
                    normal=self.normals[k, i].copy(),
                    incidence_rad=float(np.arccos(np.clip(self.cos_inc[k, i], -1, 1))),
                    refraction_rad=float(np.arccos(np.clip(self.cos_ref[k, i], -1, 1))),
                )
            )
        return RayPath(
            wavelength_nm=self.wavelength_nm,
            hits=hits,
            status=int(self.status[i]),
            fail_surface=None if fail < 0 else fail,
            opl=float(self.opl[i]),
            direction_out=self.direction_out[i].copy(),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _trace_arrays(p: LensPrescription, P: np.ndarray, D: np.ndarray,
                  wavelength_nm: float, entrance_xy: np.ndarray | None = None,
                  field_deg=(0.0, 0.0)) -> BundleTrace:
    M = P.shape[0]
    positions = p.axial_positions()
    S = len(p.surfaces) - 1
    hits = np.full((S, M, 3), np.nan)
    normals = np.full((S, M, 3), np.nan)
    cos_inc = np.full((S, M), np.nan)
    cos_ref = np.full((S, M), np.nan)
    dirs_after = np.full((S, M, 3), np.nan)
    opl_at = np.full((S, M), np.nan)
    opl = np.zeros(M)
    status = np.full(M, REACHED_IMAGE, dtype=np.int8)
    fail = np.full(M, -1, dtype=np.int16)
    alive = np.ones(M, dtype=bool)
    launch = P.copy()
    P = P.copy()
    D = D.copy()

    n_before = refractive_index(p.surfaces[0].material, wavelength_nm)
    for k, s in enumerate(p.surfaces[1:], start=1):
        n_after = refractive_index(s.material, wavelength_nm)
        X, N, t, ok = _intersect_arrays(P, D, s.radius_mm, positions[k])

        miss = alive & ~ok
        status[miss] = MISSED
        fail[miss] = k
        alive &= ok

        r = np.hypot(X[:, 0], X[:, 1])
        vign = alive & (r > s.semi_diameter_mm)
        status[vign] = VIGNETTED
        fail[vign] = k
        # Vignetted rays still record the clipping hit before they stop.
        rec = alive | vign
        hits[k - 1, rec] = X[rec]
        normals[k - 1, rec] = N[rec]
        alive &= ~vign

        opl[alive] += n_before * t[alive]
        # Vignetted rays keep the path length up to their clipping hit.
        opl_at[k - 1, rec] = opl[rec] + np.where(alive[rec], 0.0, n_before * t[rec])

        ci = -np.einsum("ij,ij->i", D, N)
        cos_inc[k - 1, rec] = ci[rec]
        if n_after != n_before:
            mu = n_before / n_after
            sin2_t = mu * mu * (1.0 - ci * ci)
            tir = alive & (sin2_t > 1.0)
            status[tir] = TIR
            fail[tir] = k
            alive &= ~tir
            ct = np.sqrt(np.clip(1.0 - sin2_t, 0.0, None))
            Dn = mu * D + (mu * ci - ct)[:, None] * N
            Dn /= np.linalg.norm(Dn, axis=1, keepdims=True)
            D = np.where(alive[:, None], Dn, D)
            cos_ref[k - 1, rec] = np.where(sin2_t[rec] <= 1.0, ct[rec], np.nan)
        else:
            cos_ref[k - 1, rec] = ci[rec]

        dirs_after[k - 1, rec] = D[rec]
        P = np.where(alive[:, None], X, P)
        n_before = n_after

    if entrance_xy is None:
        entrance_xy = launch[:, :2].copy()
    return BundleTrace(
        prescription=p,
        wavelength_nm=wavelength_nm,
        launch=launch,
        entrance_xy=entrance_xy,
        hits=hits,
        normals=normals,
        cos_inc=cos_inc,
        cos_ref=cos_ref,
        dirs_after=dirs_after,
        opl_at=opl_at,
        direction_out=D,
        opl=opl,
        status=status,
        fail_surface=fail,
        field_deg=field_deg,
    )


def trace_ray(p: LensPrescription, ray: Ray) -> RayPath:
    """Trace one ray from the object plane to the image plane."""
    bt = _trace_arrays(p, ray.position[None, :], ray.direction[None, :], ray.wavelength_nm)
    return bt[0]


def field_direction(theta_x_deg: float, theta_y_deg: float) -> np.ndarray:
    """Unit direction for field angles measured in the x-z and y-z planes."""
    v = np.array([math.tan(math.radians(theta_x_deg)),
                  math.tan(math.radians(theta_y_deg)),
                  1.0])
    return v / np.linalg.norm(v)


def _footprint_grid(p: LensPrescription, n: int):
    """Uniform Cartesian grid over the square circumscribing the clear
    aperture of the first refracting surface. Pitch 2*semi/n with a sample
    exactly on the axis (fftfreq-style layout)."""
    semi = p.first_refracting().semi_diameter_mm
    pitch = 2.0 * semi / n
    coords = (np.arange(n) - n // 2) * pitch
    gx, gy = np.meshgrid(coords, coords)
    return np.stack([gx.ravel(), gy.ravel()], axis=1), pitch


def _launch_points(p: LensPrescription, footprint_xy: np.ndarray,
                   theta_x_deg: float, theta_y_deg: float) -> np.ndarray:
    """Launch positions on the object plane such that the parallel bundle
    lands on the first-surface footprint square."""
    z0 = p.axial_positions()[0]
    z1 = p.vertex_z(p.first_refracting().index)
    dzs = z1 - z0
    shift = np.array([-dzs * math.tan(math.radians(theta_x_deg)),
                      -dzs * math.tan(math.radians(theta_y_deg))])
    M = footprint_xy.shape[0]
    out = np.empty((M, 3))
    out[:, :2] = footprint_xy + shift
    out[:, 2] = z0
    return out


def trace_bundle(p: LensPrescription, theta_y_deg: float, wavelength_nm: float,
                 n: int, theta_x_deg: float = 0.0) -> BundleTrace:
    """Trace an n x n parallel bundle at the given field angles.

    Raises DegenerateBundleError when every ray is lost.
    """
    if n < 1:
        raise TraceError(f"bundle grid size {n} < 1")
    footprint, _ = _footprint_grid(p, n)
    P = _launch_points(p, footprint, theta_x_deg, theta_y_deg)
    D = np.tile(field_direction(theta_x_deg, theta_y_deg), (P.shape[0], 1))
    bt = _trace_arrays(p, P, D, wavelength_nm, entrance_xy=footprint,
                       field_deg=(theta_x_deg, theta_y_deg))
    if bt.n_alive == 0:
        raise DegenerateBundleError(
            f"all {len(bt)} rays lost at field ({theta_x_deg}, {theta_y_deg}) deg, "
            f"{wavelength_nm} nm"
        )
    return bt


def find_chief(p: LensPrescription, theta_x_deg: float, theta_y_deg: float,
               wavelength_nm: float, tol_mm: float = 1e-9) -> tuple[RayPath, np.ndarray]:
    """Chief ray: the field ray through the stop centre.

    Newton iteration on the first-surface footprint coordinates until the
    stop-plane height falls below tol. Returns (path, footprint_xy).
    """
    stop_axis = p.stop_index

    def stop_hit(fxy: np.ndarray):
        P = _launch_points(p, fxy[None, :], theta_x_deg, theta_y_deg)
        D = field_direction(theta_x_deg, theta_y_deg)[None, :]
        bt = _trace_arrays(p, P, D, wavelength_nm)
        dead_before_stop = bt.fail_surface[0] >= 0 and bt.fail_surface[0] < stop_axis
        if dead_before_stop or not np.isfinite(bt.hits[stop_axis - 1, 0, 0]):
            return None, bt
        return bt.hits[stop_axis - 1, 0, :2].copy(), bt

    fxy = np.zeros(2)
    for _ in range(25):
        s0, bt = stop_hit(fxy)
        if s0 is None:
            raise ChiefRayError(
                f"chief ray lost before the stop at field ({theta_x_deg}, {theta_y_deg})"
            )
        if math.hypot(*s0) < tol_mm:
            if bt.status[0] != REACHED_IMAGE:
                raise ChiefRayError(f"chief ray terminated: {STATUS_NAMES[int(bt.status[0])]}")
            return bt[0], fxy
        eps = 1e-4
        sx, _ = stop_hit(fxy + np.array([eps, 0.0]))
        sy, _ = stop_hit(fxy + np.array([0.0, eps]))
        if sx is None or sy is None:
            raise ChiefRayError("chief ray Jacobian probe lost before the stop")
        J = np.column_stack([(sx - s0) / eps, (sy - s0) / eps])
        try:
            fxy = fxy - np.linalg.solve(J, s0)
        except np.linalg.LinAlgError:
            raise ChiefRayError("singular stop-plane Jacobian") from None
    raise ChiefRayError(f"chief ray search did not converge below {tol_mm} mm")
