"""Parametric violin-like plate: outline, thickness field, material.

The design space has 35 scalars: 20 multiplicative radial scales on outline
control points, 8 multiplicative scales on thickness-basis coefficients, and
7 material constants. All-ones scales with the reference material reproduce
the reference plate exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from shapely.geometry import Polygon

from .errors import (
    NonPositiveThickness,
    PerturbationInfeasible,
    SelfIntersectingOutline,
)

N_OUTLINE = 20
N_THICKNESS = 8
N_MATERIAL = 7
N_PARAMS = N_OUTLINE + N_THICKNESS + N_MATERIAL

MATERIAL_KEYS = ("rho", "e_long", "e_rad", "e_tan", "nu_lr", "nu_lt", "nu_rt")

# Full-size violin proportions (m): body length and bout widths.
BODY_LENGTH = 0.356
UPPER_BOUT = 0.168
MIDDLE_BOUT = 0.112
LOWER_BOUT = 0.208

THICKNESS_FLOOR = 2.5e-3   # constant share of the thickness basis (m)
THICKNESS_CENTER = 3.5e-3  # reference peak thickness (m)


@dataclass(frozen=True)
class OutlineParams:
    """20 radial scales on the outline control points."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.p.shape != (N_OUTLINE,):
            raise ValueError(f"outline params must have length {N_OUTLINE}")
        if not np.all((self.p > 0.0) & (self.p < 2.0)):
            raise ValueError("outline scales must lie in (0, 2)")


@dataclass(frozen=True)
class ThicknessParams:
    """8 scales on the thickness-basis coefficients."""

    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        if self.t.shape != (N_THICKNESS,):
            raise ValueError(f"thickness params must have length {N_THICKNESS}")
        if not np.all(self.t > 0.0):
            raise ValueError("thickness scales must be positive")


@dataclass(frozen=True)
class MaterialParams:
    """Orthotropic wood constants: density, 3 moduli, 3 Poisson ratios."""

    rho: float
    e_long: float
    e_rad: float
    e_tan: float
    nu_lr: float
    nu_lt: float
    nu_rt: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("density must be positive")
        if min(self.e_long, self.e_rad, self.e_tan) <= 0:
            raise ValueError("moduli must be positive")
        for nu in (self.nu_lr, self.nu_lt, self.nu_rt):
            if not 0.0 < nu < 0.5:
                raise ValueError("Poisson ratios must lie in (0, 0.5)")
        # reciprocity: nu_rl = nu_lr * e_rad / e_long, and nu_lr*nu_rl < 1
        if self.nu_lr**2 * self.e_rad / self.e_long >= 1.0:
            raise ValueError("in-plane stiffness not positive definite")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in MATERIAL_KEYS])

    @classmethod
    def from_vector(cls, m: np.ndarray) -> "MaterialParams":
        return cls(**dict(zip(MATERIAL_KEYS, map(float, m))))


@dataclass(frozen=True)
class PlateParams:
    """Full 35-dimensional design point."""

    outline: OutlineParams
    thickness: ThicknessParams
    material: MaterialParams

    def to_vector(self) -> np.ndarray:
        """Flatten to the canonical 35-vector (p, t, m)."""
        return np.concatenate(
            [self.outline.p, self.thickness.t, self.material.as_vector()]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "PlateParams":
        x = np.asarray(x, dtype=float)
        if x.shape != (N_PARAMS,):
            raise ValueError(f"parameter vector must have length {N_PARAMS}")
        return cls(
            outline=OutlineParams(x[:N_OUTLINE]),
            thickness=ThicknessParams(x[N_OUTLINE : N_OUTLINE + N_THICKNESS]),
            material=MaterialParams.from_vector(x[N_OUTLINE + N_THICKNESS :]),
        )

    def to_json_dict(self) -> dict:
        return {
            "p": self.outline.p.tolist(),
            "t": self.thickness.t.tolist(),
            "m": {k: float(getattr(self.material, k)) for k in MATERIAL_KEYS},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PlateParams":
        return cls(
            outline=OutlineParams(np.asarray(d["p"], dtype=float)),
            thickness=ThicknessParams(np.asarray(d["t"], dtype=float)),
            material=MaterialParams(**{k: float(d["m"][k]) for k in MATERIAL_KEYS}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, s: str) -> "PlateParams":
        return cls.from_json_dict(json.loads(s))


def sitka_spruce() -> MaterialParams:
    """Reference material: Sitka spruce, FPL-style orthotropic ratios."""
    e_long = 10.8e9
    return MaterialParams(
        rho=400.0,
        e_long=e_long,
        e_rad=0.078 * e_long,
        e_tan=0.043 * e_long,
        nu_lr=0.37,
        nu_lt=0.47,
        nu_rt=0.43,
    )


def reference_params() -> PlateParams:
    return PlateParams(
        outline=OutlineParams(np.ones(N_OUTLINE)),
        thickness=ThicknessParams(np.ones(N_THICKNESS)),
        material=sitka_spruce(),
    )


def _silhouette(n: int = 2000) -> np.ndarray:
    """Dense reference silhouette polyline, closed, CCW, long axis = x."""
    # half-width envelope over normalized axial coordinate u in [-1, 1];
    # the sqrt factor rounds the ends, the pchip envelope shapes the bouts
    u_sta = np.array([-1.0, -0.55, -0.2, 0.0, 0.2, 0.55, 1.0])
    g_sta = np.array([0.094, 0.1215, 0.072, 0.0555, 0.062, 0.1045, 0.088])
    env = PchipInterpolator(u_sta, g_sta)

    u = np.cos(np.linspace(np.pi, 0.0, n))  # cluster points at the ends
    x = 0.5 * BODY_LENGTH * (u + 1.0)
    w = env(u) * np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    top = np.column_stack([x, w])
    bottom = np.column_stack([x[::-1], -w[::-1]])
    return np.vstack([top, bottom[1:-1]])


def _polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def _ray_radius(poly: np.ndarray, center: np.ndarray, theta: float) -> float:
    """Distance from center to the outline along direction theta."""
    d = np.array([np.cos(theta), np.sin(theta)])
    a = poly - center
    b = np.roll(poly, -1, axis=0) - center
    # solve center + r*d = a + s*(b-a) for each segment
    e = b - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (a[:, 0] * d[1] - a[:, 1] * d[0]) / -denom
        r = np.where(
            np.abs(denom) > 1e-14,
            (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]) / denom,
            -1.0,
        )
    hits = r[(r > 0) & (s >= 0) & (s < 1)]
    if hits.size == 0:
        raise RuntimeError("ray missed the outline")
    return float(hits.max())


@dataclass(frozen=True)
class ReferencePlate:
    """Synthetic reference plate: outline control points, thickness basis,
    reference material."""

    centroid: np.ndarray
    control_angles: np.ndarray   # 20 angular stations (rad)
    control_radii: np.ndarray    # reference radius at each station (m)
    bump_centers: np.ndarray     # (8, 2) Gaussian centers
    bump_sigma: np.ndarray       # (2,) anisotropic widths (m)
    bump_amps: np.ndarray        # (8,) reference bump amplitudes (m)
    material: MaterialParams = field(default_factory=sitka_spruce)

    def control_points(self, p: np.ndarray | None = None) -> np.ndarray:
        """Control points, optionally radially scaled by p."""
        r = self.control_radii if p is None else self.control_radii * p
        return self.centroid + np.column_stack(
            [r * np.cos(self.control_angles), r * np.sin(self.control_angles)]
        )

    def thickness_basis(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the 8 thickness basis functions at (n, 2) points -> (n, 8).

        Each basis carries an equal share of the constant floor plus one
        Gaussian bump, so the field is linear in the 8 coefficients and
        scaling all of them scales the whole field.
        """
        points = np.atleast_2d(points)
        dx = (points[:, 0:1] - self.bump_centers[None, :, 0]) / self.bump_sigma[0]
        dy = (points[:, 1:2] - self.bump_centers[None, :, 1]) / self.bump_sigma[1]
        bumps = self.bump_amps[None, :] * np.exp(-0.5 * (dx**2 + dy**2))
        return THICKNESS_FLOOR / N_THICKNESS + bumps


def make_reference_plate() -> ReferencePlate:
    """Build the fixed synthetic reference plate."""
    sil = _silhouette()
    centroid = _polygon_centroid(sil)
    angles = np.linspace(0.0, 2.0 * np.pi, N_OUTLINE, endpoint=False)
    radii = np.array([_ray_radius(sil, centroid, th) for th in angles])

    # thickness basis: 2 x 4 grid of Gaussian bumps over the bounding box
    xmin, xmax = sil[:, 0].min(), sil[:, 0].max()
    ymin, ymax = sil[:, 1].min(), sil[:, 1].max()
    gx = xmin + (xmax - xmin) * (np.arange(4) + 0.5) / 4.0
    gy = ymin + (ymax - ymin) * (np.arange(2) + 0.5) / 2.0
    centers = np.array([[x, y] for y in gy for x in gx])
    sigma = np.array([(xmax - xmin) / 7.5, (ymax - ymin) / 5.0])

    # calibrate equal bump amplitudes so the reference peak hits the
    # center-thick target
    ref = ReferencePlate(
        centroid=centroid,
        control_angles=angles,
        control_radii=radii,
        bump_centers=centers,
        bump_sigma=sigma,
        bump_amps=np.ones(N_THICKNESS),
    )
    xs = np.linspace(xmin, xmax, 60)
    ys = np.linspace(ymin, ymax, 40)
    grid = np.array([[x, y] for x in xs for y in ys])
    interior = grid[_points_inside(sil, grid)]
    basis = ref.thickness_basis(interior)
    peak = (basis - THICKNESS_FLOOR / N_THICKNESS).sum(axis=1).max()
    amp = (THICKNESS_CENTER - THICKNESS_FLOOR) / peak
    return replace(ref, bump_amps=np.full(N_THICKNESS, amp))


@dataclass(frozen=True)
class PlateGeometry:
    """Concrete plate realization: closed boundary polyline + thickness."""

    boundary: np.ndarray  # (n, 2), closed implicitly (last != first)
    ref: ReferencePlate
    thickness_coeffs: np.ndarray  # effective 8 coefficients (t-scaled)
    material: MaterialParams

    def thickness_at(self, points: np.ndarray) -> np.ndarray:
        return self.ref.thickness_basis(points) @ self.thickness_coeffs

    @property
    def area(self) -> float:
        return shoelace_area(self.boundary)

    def to_json_dict(self, thickness_grid: int = 0) -> dict:
        d = {
            "boundary": self.boundary.tolist(),
            "area_m2": self.area,
        }
        if thickness_grid:
            xmin, ymin = self.boundary.min(axis=0)
            xmax, ymax = self.boundary.max(axis=0)
            xs = np.linspace(xmin, xmax, thickness_grid)
            ys = np.linspace(ymin, ymax, thickness_grid)
            X, Y = np.meshgrid(xs, ys)
            pts = np.column_stack([X.ravel(), Y.ravel()])
            inside = _points_inside(self.boundary, pts)
            th = np.full(len(pts), np.nan)
            th[inside] = self.thickness_at(pts[inside])
            cells = th.reshape(thickness_grid, thickness_grid)
            d["thickness_grid"] = {
                "x": xs.tolist(),
                "y": ys.tolist(),
                # outside-the-outline samples serialize as null, not NaN
                "thickness_m": [
                    [None if np.isnan(v) else float(v) for v in row]
                    for row in cells
                ],
            }
        return d


def _points_inside(boundary: np.ndarray, points: np.ndarray) -> np.ndarray:
    from matplotlib.path import Path

    return Path(boundary).contains_points(points)


def shoelace_area(boundary: np.ndarray) -> float:
    """Polygon area of a closed polyline (positive regardless of winding)."""
    x, y = boundary[:, 0], boundary[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def realize(
    params: PlateParams, ref: ReferencePlate, n_boundary: int = 512
) -> PlateGeometry:
    """Turn a design point into a concrete geometry.

    Outline control point i moves radially by factor p_i about the
    reference centroid; thickness coefficient j is scaled by t_j.
    """
    pts = ref.control_points(params.outline.p)
    closed = np.vstack([pts, pts[:1]])
    s = np.arange(N_OUTLINE + 1, dtype=float)
    spline = CubicSpline(s, closed, bc_type="periodic")
    u = np.linspace(0.0, N_OUTLINE, n_boundary, endpoint=False)
    boundary = spline(u)

    if not Polygon(boundary).is_valid:
        raise SelfIntersectingOutline("scaled outline self-intersects")

    coeffs = params.thickness.t * 1.0
    geom = PlateGeometry(
        boundary=boundary,
        ref=ref,
        thickness_coeffs=coeffs,
        material=params.material,
    )
    # positivity probe on a coarse interior grid
    inner = ref.centroid + 0.98 * (boundary[::4] - ref.centroid)
    if np.any(geom.thickness_at(inner) <= 0.0):
        raise NonPositiveThickness("thickness field not strictly positive")
    return geom


def area(geometry: PlateGeometry) -> float:
    return geometry.area


_FAMILY_SLICES = {
    "outline": slice(0, N_OUTLINE),
    "thickness": slice(N_OUTLINE, N_OUTLINE + N_THICKNESS),
    "material": slice(N_OUTLINE + N_THICKNESS, N_PARAMS),
}


def _vector_ok(x: np.ndarray) -> bool:
    try:
        PlateParams.from_vector(x)
        return True
    except ValueError:
        return False


def perturb(
    params: PlateParams,
    which: set[str] | tuple[str, ...] | list[str],
    sigma: float,
    rng: np.random.Generator,
    max_redraws: int = 100,
) -> PlateParams:
    """Multiply selected parameter families by (1 + delta), delta ~ N(0, sigma^2).

    Components whose draw violates the family invariants are redrawn
    individually, up to max_redraws times each.
    """
    unknown = set(which) - set(_FAMILY_SLICES)
    if unknown:
        raise ValueError(f"unknown families: {sorted(unknown)}")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")

    x = params.to_vector()
    for family in ("outline", "thickness", "material"):
        if family not in which:
            continue
        sl = _FAMILY_SLICES[family]
        idx = np.arange(sl.start, sl.stop)
        for i in idx:
            base = x[i]
            for attempt in range(max_redraws + 1):
                x[i] = base * (1.0 + sigma * rng.standard_normal())
                if _vector_ok(x):
                    break
            else:
                raise PerturbationInfeasible(
                    f"component {i} infeasible after {max_redraws} redraws"
                )
    return PlateParams.from_vector(x)
