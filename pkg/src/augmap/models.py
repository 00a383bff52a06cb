"""Planar discrete maps on the closed first quadrant.

Four parametric families are built in (Leslie-Gower competition, Ricker
competition, a mutualism model and a predator-prey model); arbitrary maps
can be wrapped with :func:`generic`. All component functions are numpy
aware, so the same map evaluates a single point or a whole grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Callable, NamedTuple

import numpy as np

from .numerics import fd_jacobian

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
JacobianField = Callable[[float, float], np.ndarray]
BBox = tuple[float, float, float, float]  # (x0, x1, y0, y1)


class Point(NamedTuple):
    x: float
    y: float


class NonFiniteError(ArithmeticError):
    """A map evaluation overflowed or produced NaN.

    ``index`` is the orbit index at which it happened, when known.
    """

    def __init__(self, message: str, point=None, index: int | None = None):
        super().__init__(message)
        self.point = point
        self.index = index


class Family(enum.Enum):
    COMPETITION = "competition"
    RICKER = "ricker"
    MUTUALISM = "mutualism"
    PREDPREY = "predprey"
    GENERIC = "generic"


class _PositiveParams:
    """Mixin: every dataclass field must be a finite, strictly positive real."""

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValueError(f"parameter {f.name} must be a number, got {v!r}")
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"parameter {f.name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, f.name, float(v))

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CompetitionParams(_PositiveParams):
    r1: float
    r2: float
    K1: float
    K2: float
    alpha1: float
    alpha2: float


@dataclass(frozen=True)
class RickerParams(_PositiveParams):
    K: float
    L: float
    a: float
    b: float


@dataclass(frozen=True)
class MutualismParams(_PositiveParams):
    a: float
    b: float
    A: float
    B: float
    c: float
    d: float
    C: float
    D: float


@dataclass(frozen=True)
class PredPreyParams(_PositiveParams):
    r: float
    K: float
    alpha: float
    gamma: float
    d: float


PARAM_TYPES = {
    Family.COMPETITION: CompetitionParams,
    Family.RICKER: RickerParams,
    Family.MUTUALISM: MutualismParams,
    Family.PREDPREY: PredPreyParams,
}


@dataclass(frozen=True)
class PlanarMap:
    """An immutable planar map ``(X, Y) -> (F(X, Y), G(X, Y))``."""

    family: Family
    params: object
    F: Field
    G: Field
    jacobian: JacobianField | None = None
    bbox: BBox | None = None
    name: str = ""

    def __call__(self, x, y):
        return self.F(x, y), self.G(x, y)

    def default_bbox(self) -> BBox:
        if self.bbox is not None:
            return self.bbox
        return default_bbox(self)


def competition(p: CompetitionParams, bbox: BBox | None = None) -> PlanarMap:
    r1, r2, K1, K2, a1, a2 = p.r1, p.r2, p.K1, p.K2, p.alpha1, p.alpha2

    def F(x, y):
        return (1.0 + r1) * x / (1.0 + r1 / K1 * x + a1 * y)

    def G(x, y):
        return (1.0 + r2) * y / (1.0 + r2 / K2 * y + a2 * x)

    def jac(x, y):
        d1 = 1.0 + r1 / K1 * x + a1 * y
        d2 = 1.0 + r2 / K2 * y + a2 * x
        return np.array([
            [(1 + r1) * (1 + a1 * y) / d1**2, -(1 + r1) * a1 * x / d1**2],
            [-(1 + r2) * a2 * y / d2**2, (1 + r2) * (1 + a2 * x) / d2**2],
        ])

    return PlanarMap(Family.COMPETITION, p, F, G, jac, bbox, "competition")


def ricker(p: RickerParams, bbox: BBox | None = None) -> PlanarMap:
    K, L, a, b = p.K, p.L, p.a, p.b

    def F(x, y):
        return x * np.exp(K - x - a * y)

    def G(x, y):
        return y * np.exp(L - b * x - y)

    def jac(x, y):
        ex = math.exp(K - x - a * y)
        ey = math.exp(L - b * x - y)
        return np.array([[ex * (1 - x), -a * x * ex], [-b * y * ey, ey * (1 - y)]])

    return PlanarMap(Family.RICKER, p, F, G, jac, bbox, "ricker")


def mutualism(p: MutualismParams, bbox: BBox | None = None) -> PlanarMap:
    a, b, A, B, c, d, C, D = p.a, p.b, p.A, p.B, p.c, p.d, p.C, p.D

    def F(x, y):
        return (a + b * y) * x / (A + B * x)

    def G(x, y):
        return (c + d * x) * y / (C + D * y)

    def jac(x, y):
        return np.array([
            [(a + b * y) * A / (A + B * x) ** 2, b * x / (A + B * x)],
            [d * y / (C + D * y), (c + d * x) * C / (C + D * y) ** 2],
        ])

    return PlanarMap(Family.MUTUALISM, p, F, G, jac, bbox, "mutualism")


def predprey(p: PredPreyParams, bbox: BBox | None = None) -> PlanarMap:
    r, K, al, g, d = p.r, p.K, p.alpha, p.gamma, p.d

    def F(x, y):
        return (1.0 + r) * x / (1.0 + r / K * x + al * y)

    def G(x, y):
        return (1.0 + g * x) * y / (1.0 + d)

    def jac(x, y):
        den = 1.0 + r / K * x + al * y
        return np.array([
            [(1 + r) * (1 + al * y) / den**2, -(1 + r) * al * x / den**2],
            [g * y / (1 + d), (1 + g * x) / (1 + d)],
        ])

    return PlanarMap(Family.PREDPREY, p, F, G, jac, bbox, "predprey")


def generic(F: Field, G: Field, bbox: BBox, jacobian: JacobianField | None = None,
            params: dict | None = None, name: str = "generic") -> PlanarMap:
    """Wrap two user-supplied component functions.

    Functions that do not broadcast over numpy arrays are vectorised.
    """
    x0, x1, y0, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"bounding box must have positive area, got {bbox}")
    return PlanarMap(Family.GENERIC, dict(params or {}), _broadcasting(F), _broadcasting(G),
                     jacobian, tuple(map(float, bbox)), name)


def _broadcasting(f: Field) -> Field:
    try:
        out = f(np.array([0.5, 1.0]), np.array([0.25, 2.0]))
        if np.shape(out) == (2,):
            return f
    except Exception:
        pass
    vec = np.vectorize(f, otypes=[float])

    def wrapped(x, y):
        out = vec(x, y)
        return out.item() if np.ndim(out) == 0 else out

    return wrapped


def build(family: Family | str, params, bbox: BBox | None = None) -> PlanarMap:
    """Construct a built-in family from a parameter record or a plain dict."""
    family = Family(family)
    if family is Family.GENERIC:
        raise ValueError("generic maps are built with augmap.models.generic")
    cls = PARAM_TYPES[family]
    if isinstance(params, dict):
        names = {f.name for f in fields(cls)}
        unknown = set(params) - names
        missing = names - set(params)
        if unknown or missing:
            raise ValueError(f"{family.value} parameters: missing {sorted(missing)}, unknown {sorted(unknown)}")
        params = cls(**params)
    maker = {Family.COMPETITION: competition, Family.RICKER: ricker,
             Family.MUTUALISM: mutualism, Family.PREDPREY: predprey}[family]
    return maker(params, bbox)


def default_bbox(m: PlanarMap) -> BBox:
    """Plotting / sampling window used when the caller gives none."""
    p = m.params
    if m.family is Family.COMPETITION:
        s = 1.2 * max(p.K1, p.r2 / p.alpha2)
        t = 1.2 * max(p.K2, p.r1 / p.alpha1)
        return (0.0, s, 0.0, t)
    if m.family is Family.RICKER:
        s = 1.5 * max(p.K, p.L / p.b, p.K / p.a, p.L)
        return (0.0, s, 0.0, s)
    if m.family is Family.MUTUALISM:
        s = 6.0
        det = p.B * p.D - p.b * p.d
        if det != 0:
            # interior equilibrium of the two nullcline lines
            xs = (p.b * (p.c - p.C) + p.D * (p.a - p.A)) / det
            ys = (p.A - p.a + p.B * xs) / p.b
            if xs > 0 and ys > 0:
                s = max(s, 1.5 * max(xs, ys))
        return (0.0, s, 0.0, s)
    if m.family is Family.PREDPREY:
        s = max(6.0, 1.5 * (1 + p.r) * p.K / p.r)
        return (0.0, s, 0.0, s)
    raise ValueError("generic maps need an explicit bounding box")


# Named parameter sets used in the documentation and acceptance suite.
PRESETS: dict[str, tuple[Family, dict[str, float]]] = {
    "competition_degenerate": (Family.COMPETITION, dict(r1=1, r2=1, K1=1, K2=1, alpha1=1, alpha2=1)),
    "competition_exclusion": (Family.COMPETITION, dict(r1=0.5, r2=0.625, K1=0.5, K2=2, alpha1=1, alpha2=1)),
    "competition_bistable": (Family.COMPETITION, dict(r1=0.5, r2=2, K1=2, K2=1.3, alpha1=1, alpha2=3)),
    "competition_coexistence": (Family.COMPETITION, dict(r1=2, r2=2, K1=1, K2=1, alpha1=1, alpha2=1)),
    "ricker_coexistence": (Family.RICKER, dict(K=0.6, L=0.6, a=0.35, b=0.4)),
    "ricker_jumping": (Family.RICKER, dict(K=0.9, L=1.6, a=0.4, b=0.3)),
    "mutualism_split_roots": (Family.MUTUALISM, dict(a=16, b=1, A=4, B=2, c=4, d=1, C=3, D=2)),
    "mutualism_coexistence": (Family.MUTUALISM, dict(a=8, b=1, A=4, B=2, c=4.8, d=1, C=3, D=2)),
    "predprey_prey_only": (Family.PREDPREY, dict(r=1, K=1, alpha=1, gamma=0.5, d=1)),
    "predprey_coexistence": (Family.PREDPREY, dict(r=1, K=1, alpha=1, gamma=1.5, d=1)),
}


def preset(name: str, bbox: BBox | None = None) -> PlanarMap:
    family, params = PRESETS[name]
    return build(family, dict(params), bbox)


def step(m: PlanarMap, p) -> Point:
    """One application of the map. Raises :class:`NonFiniteError` on overflow."""
    x, y = float(p[0]), float(p[1])
    with np.errstate(all="ignore"):
        fx = float(m.F(x, y))
        gy = float(m.G(x, y))
    if not (math.isfinite(fx) and math.isfinite(gy)):
        raise NonFiniteError(f"non-finite image of ({x}, {y}): ({fx}, {gy})", point=(x, y))
    return Point(fx, gy)


@dataclass(frozen=True)
class Orbit:
    """Forward orbit ``points[0..]``; ``failed_at`` is the first index whose image was non-finite."""

    points: np.ndarray
    failed_at: int | None = None

    @property
    def complete(self) -> bool:
        return self.failed_at is None


def orbit(m: PlanarMap, p0, n: int) -> Orbit:
    if n < 0:
        raise ValueError("n must be >= 0")
    pts = np.empty((n + 1, 2))
    pts[0] = (float(p0[0]), float(p0[1]))
    for t in range(n):
        try:
            pts[t + 1] = step(m, pts[t])
        except NonFiniteError:
            return Orbit(pts[: t + 1].copy(), failed_at=t)
    return Orbit(pts)


def iterate_batch(m: PlanarMap, xs: np.ndarray, ys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Iterate many starts ``n`` times in lockstep.

    Returns final coordinates and a boolean mask of orbits that stayed
    finite; a diverged orbit is frozen at NaN and does not affect the rest.
    """
    x = np.array(xs, dtype=float)
    y = np.array(ys, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    with np.errstate(all="ignore"):
        for _ in range(n):
            x, y = m.F(x, y), m.G(x, y)
            ok &= np.isfinite(x) & np.isfinite(y)
    x = np.where(ok, x, np.nan)
    y = np.where(ok, y, np.nan)
    return x, y, ok


def jacobian_at(m: PlanarMap, p, analytic: bool = True) -> np.ndarray:
    """2x2 Jacobian at ``p``: analytic when the family has one, else central differences."""
    x, y = float(p[0]), float(p[1])
    with np.errstate(all="ignore"):
        if analytic and m.jacobian is not None:
            J = np.asarray(m.jacobian(x, y), dtype=float)
        else:
            J = fd_jacobian(lambda q: np.array([m.F(q[0], q[1]), m.G(q[0], q[1])], dtype=float), np.array([x, y]))
    if not np.all(np.isfinite(J)):
        raise NonFiniteError(f"non-finite Jacobian at ({x}, {y})", point=(x, y))
    return J
