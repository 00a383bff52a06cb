"""Next-iterate operators of nullclines, their root-sets and root-curves.

For a nullcline ``Y = l(X)`` the operator is ``L(X, Y) = G(X, Y) - l(F(X, Y))``:
positive exactly when the image of ``(X, Y)`` lies above the nullcline.
For a nullcline written ``X = k(Y)`` it is ``F(X, Y) - k(G(X, Y))``,
positive when the image lies to the right.

The competition map has quadratic operator numerators, so its root-curves
are available in closed form (:func:`closed_form_root_curves`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .models import CompetitionParams, NonFiniteError, PlanarMap, Point, competition, step
from .nullclines import NullclineCurve, Orientation, competition_nullclines, model_nullclines
from .numerics import bisect

DISCRIMINANT_CLIP = 1e-12
JOINT_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class NextIterateOperator:
    map: PlanarMap
    nullcline: NullclineCurve

    @property
    def label(self) -> str:
        return self.nullcline.label

    def __call__(self, x, y):
        F, G = self.map.F(x, y), self.map.G(x, y)
        if self.nullcline.orientation is Orientation.EXPLICIT_IN_X:
            return G - self.nullcline.fn(F)
        return F - self.nullcline.fn(G)


def eval_operator(op: NextIterateOperator, p) -> float:
    """Operator value at one point; raises :class:`NonFiniteError` if the image overflows."""
    q = step(op.map, p)  # raises on overflow
    nc = op.nullcline
    if nc.orientation is Orientation.EXPLICIT_IN_X:
        v = q.y - float(nc.fn(q.x))
    else:
        v = q.x - float(nc.fn(q.y))
    if not math.isfinite(v):
        raise NonFiniteError(f"operator {op.label} not finite at {tuple(p)}", point=tuple(p))
    return v


def operators_for(m: PlanarMap, nullclines: list[NullclineCurve] | None = None) -> list[NextIterateOperator]:
    if nullclines is None:
        nullclines = model_nullclines(m)
    return [NextIterateOperator(m, nc) for nc in nullclines]


class QuadraticRootCoeffs:
    """Coefficients of the operator numerators of the competition map.

    ``N_h(X, Y) = a0(X) + a1(X) Y + a2 Y^2 = A0(Y) + A1(Y) X + A2 X^2`` and
    likewise ``N_k`` with ``b``/``B``. The operators are
    ``L_h = N_h / (alpha1 d1 d2)`` and ``L_k = N_k / (r2 d1 d2)`` with
    ``d1 = K1 + r1 X + alpha1 K1 Y`` and ``d2 = K2 + alpha2 K2 X + r2 Y``.
    """

    def __init__(self, p: CompetitionParams):
        self.p = p
        r1, r2, K1, K2, a1, a2 = p.r1, p.r2, p.K1, p.K2, p.alpha1, p.alpha2
        self.a2 = a1 * K1 * (a1 * K2 * (1 + r2) - r1 * r2)
        self.A2 = a2 * K2 * r1
        self.b2 = a1 * r2 * K1 * K2
        self.B2 = a2 * K2**2 * (a2 * K1 * (1 + r1) - r1 * r2)

    def a0(self, x):
        p = self.p
        return -p.r1 * p.K2 * (p.K1 - x) * (1 + p.alpha2 * x)

    def a1(self, x):
        p = self.p
        return (-p.r1 * p.r2 * (p.K1 - x)
                - p.alpha1 * p.K2 * (-p.r1 * (1 + p.r2) * x + p.K1 * (-1 + p.r1 - p.r2 + p.alpha2 * p.r1 * x)))

    def A0(self, y):
        p = self.p
        return p.K1 * (1 + p.alpha1 * y) * (-p.r1 * p.r2 * y + p.K2 * (-p.r1 + p.alpha1 * (1 + p.r2) * y))

    def A1(self, y):
        p = self.p
        return p.r1 * (p.r2 * y + p.K2 * (1 + p.alpha1 * (1 + p.r2) * y - p.alpha2 * (p.K1 + p.alpha1 * p.K1 * y)))

    def b0(self, x):
        p = self.p
        return p.K2**2 * (1 + p.alpha2 * x) * (p.K1 * (p.alpha2 * (1 + p.r1) * x - p.r2) - p.r1 * p.r2 * x)

    def b1(self, x):
        p = self.p
        return p.K2 * p.r2 * (p.r1 * x + p.K1 * (1 + p.alpha2 * (1 + p.r1) * x - p.alpha1 * (p.K2 + p.alpha2 * p.K2 * x)))

    def B0(self, y):
        p = self.p
        return -p.K1 * p.K2 * p.r2 * (p.K2 - y) * (1 + p.alpha1 * y)

    def B1(self, y):
        p = self.p
        return p.K2 * (p.r1 * p.r2 * (y - p.K2)
                       + p.alpha2 * p.K1 * ((1 + p.r1) * p.r2 * y + p.K2 * (1 + p.r1 - p.r2 * (1 + p.alpha1 * y))))

    def N_h(self, x, y, form: str = "a"):
        if form == "a":
            return self.a0(x) + self.a1(x) * y + self.a2 * y**2
        return self.A0(y) + self.A1(y) * x + self.A2 * x**2

    def N_k(self, x, y, form: str = "b"):
        if form == "b":
            return self.b0(x) + self.b1(x) * y + self.b2 * y**2
        return self.B0(y) + self.B1(y) * x + self.B2 * x**2

    def denominators(self, x, y):
        p = self.p
        d1 = p.K1 + p.r1 * x + p.alpha1 * p.K1 * y
        d2 = p.K2 + p.alpha2 * p.K2 * x + p.r2 * y
        return d1, d2

    def L_h(self, x, y):
        d1, d2 = self.denominators(x, y)
        return self.N_h(x, y) / (self.p.alpha1 * d1 * d2)

    def L_k(self, x, y):
        d1, d2 = self.denominators(x, y)
        return self.N_k(x, y) / (self.p.r2 * d1 * d2)


def competition_quadratics(p: CompetitionParams) -> QuadraticRootCoeffs:
    return QuadraticRootCoeffs(p)


def quadratic_branches(c0, c1, c2: float, zero_rtol: float = 1e-14):
    """Both roots of ``c0 + c1 t + c2 t^2 = 0`` as (``+sqrt`` branch, ``-sqrt`` branch).

    Evaluated without cancellation. Where the discriminant is negative
    (below ``-DISCRIMINANT_CLIP``) the roots are NaN; slightly negative
    values are treated as a double root. When ``c2`` vanishes both
    branches are the linear root ``-c0/c1``.
    """
    c0 = np.asarray(c0, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    scale = max(1.0, float(np.max(np.abs(c1))) if c1.size else 1.0)
    if abs(c2) <= zero_rtol * scale:
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = -c0 / c1
        return lin, lin.copy()
    disc = c1 * c1 - 4.0 * c0 * c2
    disc = np.where((disc < 0) & (disc > -DISCRIMINANT_CLIP), 0.0, disc)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.sqrt(disc)
        # (-c1 + s)/(2 c2) and (-c1 - s)/(2 c2), choosing the stable form for each sign of c1
        plus = np.where(c1 >= 0, -2.0 * c0 / (c1 + s), (-c1 + s) / (2.0 * c2))
        minus = np.where(c1 >= 0, (-c1 - s) / (2.0 * c2), 2.0 * c0 / (s - c1))
        # c1 == 0 and c0 == 0: both roots are zero
        both_zero = (c1 == 0) & (s == 0)
        plus = np.where(both_zero, 0.0, plus)
        minus = np.where(both_zero, 0.0, minus)
    bad = disc < 0
    return np.where(bad, np.nan, plus), np.where(bad, np.nan, minus)


class RootCurveKind(enum.Enum):
    CLOSED_FORM = "closed_form"
    TRACED = "traced"


@dataclass
class RootCurve:
    """One branch of the zero set of a next-iterate operator.

    Closed-form branches carry ``fn`` and ``variable`` (``"X"``: the branch
    is ``Y = fn(X)``; ``"Y"``: ``X = fn(Y)``); traced branches carry a
    polyline in ``points``.
    """

    kind: RootCurveKind
    nullcline: str
    branch: str | None = None
    variable: str | None = None
    fn: Callable | None = None
    points: np.ndarray | None = None
    closed: bool = False
    in_window: bool = True
    window: tuple[float, float, float, float] | None = None

    def __call__(self, t):
        return self.fn(t)

    def undefined(self, t) -> np.ndarray:
        """Mask of parameters where the branch does not exist (negative discriminant)."""
        return ~np.isfinite(self.fn(np.asarray(t, dtype=float)))

    def sample(self, n: int = 2001, window=None) -> np.ndarray:
        """Points of the branch inside ``window`` (default: its own window)."""
        if self.kind is RootCurveKind.TRACED:
            return self.points
        x0, x1, y0, y1 = window or self.window
        if self.variable == "X":
            t = np.linspace(x0, x1, n)
            v = self.fn(t)
            pts = np.column_stack([t, v])
        else:
            t = np.linspace(y0, y1, n)
            v = self.fn(t)
            pts = np.column_stack([v, t])
        return pts[self._inside(pts, (x0, x1, y0, y1))]

    @staticmethod
    def _inside(pts: np.ndarray, window) -> np.ndarray:
        x0, x1, y0, y1 = window
        return (np.isfinite(pts).all(axis=1) & (pts[:, 0] >= x0) & (pts[:, 0] <= x1)
                & (pts[:, 1] >= y0) & (pts[:, 1] <= y1))

    def pieces(self, n: int = 2001, window=None) -> list[np.ndarray]:
        """Contiguous runs of :meth:`sample`, split where the branch leaves the window or is undefined."""
        if self.kind is RootCurveKind.TRACED:
            return [self.points]
        window = window or self.window
        x0, x1, y0, y1 = window
        t = np.linspace(x0, x1, n) if self.variable == "X" else np.linspace(y0, y1, n)
        with np.errstate(all="ignore"):
            v = self.fn(t)
        pts = np.column_stack([t, v]) if self.variable == "X" else np.column_stack([v, t])
        keep = self._inside(pts, window)
        edges = np.flatnonzero(np.diff(np.concatenate([[0], keep.astype(int), [0]])))
        return [pts[a:b] for a, b in zip(edges[::2], edges[1::2])]


def closed_form_root_curves(p: CompetitionParams, window=None) -> list[RootCurve]:
    """The eight quadratic branches ``rh1, rh2, Rh1, Rh2, rk1, rk2, Rk1, Rk2``.

    Branches with no point in the first-quadrant ``window`` are kept but
    flagged ``in_window=False``.
    """
    q = QuadraticRootCoeffs(p)
    if window is None:
        window = competition(p).default_bbox()

    def branch(c0, c1, c2, which):
        def fn(t):
            plus, minus = quadratic_branches(c0(t), c1(t), c2)
            return plus if which == 1 else minus
        return fn

    specs = [
        ("rh1", "h", "X", branch(q.a0, q.a1, q.a2, 1)),
        ("rh2", "h", "X", branch(q.a0, q.a1, q.a2, 2)),
        ("Rh1", "h", "Y", branch(q.A0, q.A1, q.A2, 1)),
        ("Rh2", "h", "Y", branch(q.A0, q.A1, q.A2, 2)),
        ("rk1", "k", "X", branch(q.b0, q.b1, q.b2, 1)),
        ("rk2", "k", "X", branch(q.b0, q.b1, q.b2, 2)),
        ("Rk1", "k", "Y", branch(q.B0, q.B1, q.B2, 1)),
        ("Rk2", "k", "Y", branch(q.B0, q.B1, q.B2, 2)),
    ]
    curves = []
    for bid, label, var, fn in specs:
        c = RootCurve(RootCurveKind.CLOSED_FORM, label, branch=bid, variable=var, fn=fn, window=tuple(window))
        c.in_window = len(c.sample(512)) > 0
        curves.append(c)
    return curves


def root_set_nullcline_intersections(
    m: PlanarMap,
    nullcline: NullclineCurve,
    op: NextIterateOperator | None = None,
    window: tuple[float, float] | None = None,
    resolution: float = 1e-4,
    zero_tol: float = 1e-12,
    accept_tol: float = 1e-10,
) -> list[Point]:
    """Zeros of an operator restricted to a nullcline.

    The curve parameter is scanned at spacing ``resolution``; sign changes
    are bisected, interior local minima of ``|L|`` are minimised to catch
    tangential zeros, and stretches where the operator vanishes identically
    are returned point by point.
    """
    if op is None:
        op = NextIterateOperator(m, nullcline)
    lo, hi = nullcline.domain if window is None else window
    if not math.isfinite(hi):
        x0, x1, y0, y1 = m.default_bbox()
        hi = x1 if nullcline.orientation is Orientation.EXPLICIT_IN_X else y1
    n = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
    t = np.linspace(lo, hi, n)

    def g_scalar(s: float) -> float:
        x, y = nullcline.point_at(s)
        with np.errstate(all="ignore"):
            return float(op(float(x), float(y)))

    x, y = nullcline.point_at(t)
    with np.errstate(all="ignore"):
        g = np.asarray(op(x, y), dtype=float)

    zero = np.abs(g) <= zero_tol
    found: list[float] = []
    continuum: list[float] = []
    i = 0
    while i < n:
        if zero[i]:
            j = i
            while j + 1 < n and zero[j + 1]:
                j += 1
            if j > i:
                continuum.extend(t[i:j + 1].tolist())
            else:
                found.append(float(t[i]))
            i = j + 1
        else:
            i += 1
    for i in range(n - 1):
        if zero[i] or zero[i + 1] or not (np.isfinite(g[i]) and np.isfinite(g[i + 1])):
            continue
        if (g[i] > 0) != (g[i + 1] > 0):
            found.append(bisect(g_scalar, float(t[i]), float(t[i + 1]), tol=1e-15))
    a = np.abs(g)
    for i in range(1, n - 1):
        if zero[i] or not np.isfinite(a[i]):
            continue
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and (g[i - 1] > 0) == (g[i] > 0) == (g[i + 1] > 0):
            r = minimize_scalar(lambda s: abs(g_scalar(s)), bounds=(float(t[i - 1]), float(t[i + 1])),
                                method="bounded", options={"xatol": 1e-14})
            if r.fun < accept_tol:
                found.append(float(r.x))
    found.sort()
    merged: list[float] = []
    for s in found:
        if merged and abs(s - merged[-1]) < 2 * resolution:
            if abs(g_scalar(s)) < abs(g_scalar(merged[-1])):
                merged[-1] = s
            continue
        merged.append(s)
    params = sorted(set(merged) | set(continuum))
    pts = []
    for s in params:
        px, py = nullcline.point_at(s)
        pts.append(Point(float(px), float(py)))
    return pts


def joint_root_preimage_check(p: CompetitionParams, point, tol: float = JOINT_ZERO_TOL) -> bool:
    """True when ``point`` lies on both root-sets (within ``tol``).

    Such a point is mapped in one step onto an equilibrium.
    """
    m = competition(p)
    h, k = competition_nullclines(p)
    lh = eval_operator(NextIterateOperator(m, h), point)
    lk = eval_operator(NextIterateOperator(m, k), point)
    return abs(lh) < tol and abs(lk) < tol
