"""Nullclines, equilibria and the discrete direction field."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .models import Family, NonFiniteError, PlanarMap, Point, jacobian_at, step
from .numerics import eig2, newton2

# Coincident-nullcline test: |C| < DEGENERACY_RTOL * scale.
DEGENERACY_RTOL = 1e-12
EQUILIBRIUM_TOL = 1e-10
DEFAULT_BAND = 1e-9


class Sign(enum.IntEnum):
    MINUS = -1
    ZERO = 0
    PLUS = 1

    @property
    def glyph(self) -> str:
        return {1: "+", 0: "0", -1: "-"}[int(self)]


def sign_of(value: float, band: float = 0.0) -> Sign:
    if abs(value) <= band:
        return Sign.ZERO
    return Sign.PLUS if value > 0 else Sign.MINUS


class Orientation(enum.Enum):
    EXPLICIT_IN_X = "Y=l(X)"
    EXPLICIT_IN_Y = "X=k(Y)"


class Equation(enum.Enum):
    X = "X"
    Y = "Y"


class UnsupportedFamily(ValueError):
    pass


@dataclass(frozen=True)
class NullclineCurve:
    """A nontrivial nullcline as a graph over X (``Y = fn(X)``) or over Y (``X = fn(Y)``).

    ``fn`` is defined on all of the real line for the built-in (linear)
    nullclines; ``domain`` is only the part drawn and scanned.
    """

    orientation: Orientation
    fn: Callable[[np.ndarray], np.ndarray]
    annihilates: Equation
    domain: tuple[float, float]
    label: str
    slope: float | None = None  # set for straight lines

    def __call__(self, t):
        return self.fn(t)

    def side(self, x, y):
        """Signed offset of ``(x, y)``: positive above (graph over X) or right of (graph over Y)."""
        if self.orientation is Orientation.EXPLICIT_IN_X:
            return y - self.fn(x)
        return x - self.fn(y)

    def point_at(self, t) -> tuple:
        """Point on the curve at parameter ``t`` (an abscissa or an ordinate)."""
        if self.orientation is Orientation.EXPLICIT_IN_X:
            return t, self.fn(t)
        return self.fn(t), t

    def unit_scale(self, dx: float, dy: float) -> float:
        """Offset in :meth:`side` units that corresponds to one grid cell."""
        s = 0.0 if self.slope is None else abs(self.slope)
        if self.orientation is Orientation.EXPLICIT_IN_X:
            return dy + s * dx
        return dx + s * dy


def _line(intercept: float, slope: float, annihilates: Equation, domain, label: str) -> NullclineCurve:
    def fn(x):
        return intercept + slope * np.asarray(x, dtype=float)

    return NullclineCurve(Orientation.EXPLICIT_IN_X, fn, annihilates, domain, label, slope)


def competition_nullclines(p) -> tuple[NullclineCurve, NullclineCurve]:
    """``h`` (X-equation) and ``k`` (Y-equation) for the competition map."""
    h = _line(p.r1 / p.alpha1, -p.r1 / (p.alpha1 * p.K1), Equation.X, (0.0, p.K1), "h")
    k = _line(p.K2, -p.K2 * p.alpha2 / p.r2, Equation.Y, (0.0, p.r2 / p.alpha2), "k")
    return h, k


def model_nullclines(m: PlanarMap) -> list[NullclineCurve]:
    """Nontrivial nullclines of a built-in family, X-equation first."""
    p = m.params
    if m.family is Family.COMPETITION:
        return list(competition_nullclines(p))
    if m.family is Family.RICKER:
        return [
            _line(p.K / p.a, -1.0 / p.a, Equation.X, (0.0, p.K), "h"),
            _line(p.L, -p.b, Equation.Y, (0.0, p.L / p.b), "k"),
        ]
    if m.family is Family.MUTUALISM:
        x_lo = max(0.0, (p.a - p.A) / p.B)
        x_lo2 = max(0.0, (p.C - p.c) / p.d)
        return [
            _line((p.A - p.a) / p.b, p.B / p.b, Equation.X, (x_lo, math.inf), "h"),
            _line((p.c - p.C) / p.D, p.d / p.D, Equation.Y, (x_lo2, math.inf), "k"),
        ]
    if m.family is Family.PREDPREY:
        xstar = p.d / p.gamma
        return [
            _line(p.r / p.alpha, -p.r / (p.alpha * p.K), Equation.X, (0.0, p.K), "h"),
            NullclineCurve(Orientation.EXPLICIT_IN_Y,
                           lambda y: np.full(np.shape(y), xstar) if np.ndim(y) else xstar,
                           Equation.Y, (0.0, math.inf), "k", 0.0),
        ]
    raise UnsupportedFamily("generic maps have no closed-form nullclines; trace F-X and G-Y instead")


class EquilibriumKind(enum.Enum):
    ORIGIN = "origin"
    BOUNDARY_X = "boundary_x"  # on the X-axis
    BOUNDARY_Y = "boundary_y"  # on the Y-axis
    INTERIOR = "interior"


@dataclass(frozen=True)
class Segment:
    start: Point
    end: Point
    nullcline: str

    def distance(self, x, y):
        """Euclidean distance from points to the segment (vectorised)."""
        ax, ay = self.start
        bx, by = self.end
        vx, vy = bx - ax, by - ay
        t = ((np.asarray(x) - ax) * vx + (np.asarray(y) - ay) * vy) / (vx * vx + vy * vy)
        t = np.clip(t, 0.0, 1.0)
        return np.hypot(np.asarray(x) - (ax + t * vx), np.asarray(y) - (ay + t * vy))


@dataclass
class EquilibriumSet:
    isolated: list[tuple[Point, EquilibriumKind]] = field(default_factory=list)
    continuum: Segment | None = None
    failures: list[tuple[tuple[float, float], str]] = field(default_factory=list)

    def points(self, kind: EquilibriumKind | None = None) -> list[Point]:
        return [p for p, k in self.isolated if kind is None or k is kind]

    @property
    def interior(self) -> Point | None:
        pts = self.points(EquilibriumKind.INTERIOR)
        return pts[0] if len(pts) == 1 else None


def _kind(p, scale: float = 1.0) -> EquilibriumKind:
    tol = 1e-12 * max(1.0, scale)
    zx, zy = abs(p[0]) <= tol, abs(p[1]) <= tol
    if zx and zy:
        return EquilibriumKind.ORIGIN
    if zy:
        return EquilibriumKind.BOUNDARY_X
    if zx:
        return EquilibriumKind.BOUNDARY_Y
    return EquilibriumKind.INTERIOR


def efficiencies(p) -> tuple[float, float]:
    """Competitive efficiencies ``(r1/alpha1 - K2, r2/alpha2 - K1)``."""
    return p.r1 / p.alpha1 - p.K2, p.r2 / p.alpha2 - p.K1


def is_degenerate(p) -> bool:
    c12, c21 = efficiencies(p)
    return (abs(c12) < DEGENERACY_RTOL * max(p.r1 / p.alpha1, p.K2)
            and abs(c21) < DEGENERACY_RTOL * max(p.r2 / p.alpha2, p.K1))


def coexistence_point(p) -> Point:
    """Closed-form interior equilibrium of the competition map (valid when C12*C21 > 0)."""
    den = p.alpha1 * p.alpha2 * p.K1 * p.K2 - p.r1 * p.r2
    x = p.r2 * p.K1 * (p.alpha1 * p.K2 - p.r1) / den
    y = p.r1 * p.K2 * (p.alpha2 * p.K1 - p.r2) / den
    return Point(x, y)


def _residual(m: PlanarMap, q) -> np.ndarray:
    with np.errstate(all="ignore"):
        return np.array([m.F(q[0], q[1]) - q[0], m.G(q[0], q[1]) - q[1]], dtype=float)


def _polish(m: PlanarMap, seed, out: EquilibriumSet, box=None) -> Point | None:
    res = newton2(lambda q: _residual(m, q), seed, box=box)
    if res.converged:
        return Point(float(res.point[0]), float(res.point[1]))
    out.failures.append(((float(seed[0]), float(seed[1])), res.reason))
    return None


def equilibria(m: PlanarMap, grid: int = 128) -> EquilibriumSet:
    """Equilibria in the closed first quadrant."""
    out = EquilibriumSet()
    p = m.params
    if m.family is Family.COMPETITION:
        scale = max(p.K1, p.K2)
        for q in (Point(0.0, 0.0), Point(p.K1, 0.0), Point(0.0, p.K2)):
            out.isolated.append((q, _kind(q, scale)))
        c12, c21 = efficiencies(p)
        if is_degenerate(p):
            out.continuum = Segment(Point(0.0, p.r1 / p.alpha1), Point(p.K1, 0.0), "h")
        elif c12 * c21 > 0:
            out.isolated.append((coexistence_point(p), EquilibriumKind.INTERIOR))
        return out

    if m.family is Family.GENERIC:
        seeds = _generic_seeds(m, grid)
    else:
        seeds = _analytic_seeds(m)
    found: list[Point] = []
    x0, x1, y0, y1 = m.default_bbox()
    box = (x0 - 10 * (x1 - x0), x1 + 10 * (x1 - x0), y0 - 10 * (y1 - y0), y1 + 10 * (y1 - y0))
    for s in seeds:
        q = _polish(m, s, out, box)
        if q is None or q.x < -1e-12 or q.y < -1e-12:
            continue
        q = Point(max(q.x, 0.0), max(q.y, 0.0))
        if any(abs(q.x - f.x) + abs(q.y - f.y) < 1e-8 for f in found):
            continue
        found.append(q)
    scale = max(x1 - x0, y1 - y0)
    order = {EquilibriumKind.ORIGIN: 0, EquilibriumKind.BOUNDARY_X: 1, EquilibriumKind.BOUNDARY_Y: 2, EquilibriumKind.INTERIOR: 3}
    tagged = sorted(((q, _kind(q, scale)) for q in found), key=lambda t: (order[t[1]], t[0].x, t[0].y))
    out.isolated.extend(tagged)
    return out


def _analytic_seeds(m: PlanarMap) -> list[tuple[float, float]]:
    p = m.params
    seeds = [(0.0, 0.0)]
    if m.family is Family.RICKER:
        seeds += [(p.K, 0.0), (0.0, p.L)]
        det = 1.0 - p.a * p.b
        if det != 0:
            seeds.append(((p.K - p.a * p.L) / det, (p.L - p.b * p.K) / det))
    elif m.family is Family.MUTUALISM:
        if p.a > p.A:
            seeds.append(((p.a - p.A) / p.B, 0.0))
        if p.c > p.C:
            seeds.append((0.0, (p.c - p.C) / p.D))
        det = p.B * p.D - p.b * p.d
        if det != 0:
            xs = (p.b * (p.c - p.C) + p.D * (p.a - p.A)) / det
            seeds.append((xs, (p.A - p.a + p.B * xs) / p.b))
    elif m.family is Family.PREDPREY:
        seeds.append((p.K, 0.0))
        xs = p.d / p.gamma
        seeds.append((xs, p.r / p.alpha * (1.0 - xs / p.K)))
    return [s for s in seeds if s[0] >= 0 and s[1] >= 0]


def _generic_seeds(m: PlanarMap, n: int) -> list[tuple[float, float]]:
    """Cells of an ``n`` x ``n`` grid where both F-X and G-Y change sign."""
    x0, x1, y0, y1 = m.default_bbox()
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    with np.errstate(all="ignore"):
        fx = m.F(X, Y) - X
        gy = m.G(X, Y) - Y

    def crosses(v):
        c = np.stack([v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]])
        return (np.nanmin(c, axis=0) <= 0) & (np.nanmax(c, axis=0) >= 0)

    both = crosses(fx) & crosses(gy)
    j, i = np.nonzero(both)
    seeds = [(0.5 * (xs[a] + xs[a + 1]), 0.5 * (ys[b] + ys[b + 1])) for b, a in zip(j, i)]
    return [(0.0, 0.0)] + seeds


@dataclass(frozen=True)
class DirectionSigns:
    dx_sign: Sign
    dy_sign: Sign


def direction_signs(m: PlanarMap, p, band: float = DEFAULT_BAND) -> DirectionSigns:
    q = step(m, p)
    return DirectionSigns(sign_of(q.x - float(p[0]), band), sign_of(q.y - float(p[1]), band))


def stability(m: PlanarMap, p, tol: float = 1e-9) -> tuple[tuple[complex, complex], str]:
    """Eigenvalues of the Jacobian at ``p`` and a linear-stability tag.

    Tags: ``stable`` (both moduli < 1), ``repeller`` (both > 1), ``saddle``
    (one each side), ``nonhyperbolic`` (a modulus within ``tol`` of 1).
    """
    try:
        ev = eig2(jacobian_at(m, p))
    except NonFiniteError:
        return (complex(math.nan), complex(math.nan)), "unknown"
    mods = [abs(z) for z in ev]
    if any(abs(v - 1.0) <= tol for v in mods):
        tag = "nonhyperbolic"
    elif all(v < 1.0 for v in mods):
        tag = "stable"
    elif all(v > 1.0 for v in mods):
        tag = "repeller"
    else:
        tag = "saddle"
    return ev, tag


@dataclass
class PeriodicSearch:
    period: int
    seeds: int
    converged: int
    points: list[Point]  # distinct converged points
    minimal_periods: list[int]

    @property
    def prime(self) -> list[Point]:
        """Converged points whose least period equals the searched period."""
        return [p for p, q in zip(self.points, self.minimal_periods) if q == self.period]


def _compose(m: PlanarMap, x, y, n: int):
    for _ in range(n):
        x, y = m.F(x, y), m.G(x, y)
    return x, y


def periodic_points(m: PlanarMap, period: int, n_seeds: int = 10_000, box=None, seed: int = 0,
                    tol: float = 1e-11, max_iter: int = 60, merge_tol: float = 1e-7) -> PeriodicSearch:
    """Newton search for zeros of ``F^period - id`` from quasi-random interior seeds.

    Runs a vectorised Newton iteration with a central-difference Jacobian
    of the composed map. Each converged point is tagged with its least
    period (1 for a fixed point).
    """
    from .numerics import quasi_random_box

    if period < 1:
        raise ValueError("period must be >= 1")
    box = box if box is not None else m.default_bbox()
    s = quasi_random_box(n_seeds, box, seed=seed)
    x, y = s[:, 0].copy(), s[:, 1].copy()

    def resid(x, y):
        fx, fy = _compose(m, x, y, period)
        return fx - x, fy - y

    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            rx, ry = resid(x, y)
            h = 1e-7 * np.maximum(1.0, np.hypot(x, y))
            ax, ay = resid(x + h, y)
            bx, by = resid(x - h, y)
            cx, cy = resid(x, y + h)
            dx_, dy_ = resid(x, y - h)
            j11, j21 = (ax - bx) / (2 * h), (ay - by) / (2 * h)
            j12, j22 = (cx - dx_) / (2 * h), (cy - dy_) / (2 * h)
            det = j11 * j22 - j12 * j21
            sx = (j22 * rx - j12 * ry) / det
            sy = (-j21 * rx + j11 * ry) / det
            x, y = x - sx, y - sy
        rx, ry = resid(x, y)
    ok = np.isfinite(x) & np.isfinite(y) & (np.maximum(np.abs(rx), np.abs(ry)) < tol) & (x >= -1e-12) & (y >= -1e-12)
    found: list[Point] = []
    periods: list[int] = []
    for a, b in sorted(zip(x[ok].tolist(), y[ok].tolist())):
        a, b = max(a, 0.0), max(b, 0.0)
        if any(abs(a - f.x) + abs(b - f.y) < merge_tol for f in found):
            continue
        found.append(Point(a, b))
        least = period
        for q in range(1, period):
            if period % q:
                continue
            with np.errstate(all="ignore"):
                u, v = _compose(m, a, b, q)
            if abs(u - a) + abs(v - b) < 1e-8 * max(1.0, abs(a) + abs(b)):
                least = q
                break
        periods.append(least)
    return PeriodicSearch(period, n_seeds, int(ok.sum()), found, periods)
