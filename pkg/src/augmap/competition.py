"""Case analysis and empirical verification for the competition map.

The signs of the two competitive efficiencies select one of five regimes:
a line of equilibria, exclusion by either species, bistability, or
coexistence. This module classifies parameters, checks the operator sign
tables on a grid and simulates many orbits to confirm the predicted
global outcome.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .models import CompetitionParams, Point, competition, jacobian_at
from .next_iterate import competition_quadratics
from .nullclines import (
    DEGENERACY_RTOL,
    Segment,
    coexistence_point,
    competition_nullclines,
    efficiencies as _efficiencies,
)
from .numerics import eig2, quasi_random_box

ATTRIBUTION_WINDOW = 100


@dataclass(frozen=True)
class EfficiencyPair:
    c12: float
    c21: float

    def signs(self, p: CompetitionParams | None = None) -> tuple[int, int]:
        """Signs of ``(c12, c21)``; values within the degeneracy threshold count as zero."""
        if p is None:
            s12, s21 = 1.0, 1.0
        else:
            s12, s21 = max(p.r1 / p.alpha1, p.K2), max(p.r2 / p.alpha2, p.K1)
        return _sgn(self.c12, DEGENERACY_RTOL * s12), _sgn(self.c21, DEGENERACY_RTOL * s21)


def _sgn(v: float, tol: float) -> int:
    if abs(v) < tol:
        return 0
    return 1 if v > 0 else -1


def efficiencies(p: CompetitionParams) -> EfficiencyPair:
    return EfficiencyPair(*_efficiencies(p))


class CaseKind(enum.Enum):
    I_DegenerateLine = "I"
    II_ExclusionYWins = "II"
    II_ExclusionXWins = "II'"
    III_Bistable = "III"
    IV_Coexistence = "IV"


@dataclass(frozen=True)
class Attractor:
    name: str
    point: Point | None = None
    segment: Segment | None = None

    def distance(self, x, y):
        if self.segment is not None:
            return self.segment.distance(x, y)
        return np.hypot(np.asarray(x) - self.point.x, np.asarray(y) - self.point.y)

    def as_dict(self) -> dict:
        if self.segment is not None:
            return {"name": self.name, "segment": [list(self.segment.start), list(self.segment.end)]}
        return {"name": self.name, "point": [self.point.x, self.point.y]}


@dataclass(frozen=True)
class CasePrediction:
    case: CaseKind
    efficiencies: EfficiencyPair
    predicted_limits: tuple[Attractor, ...]
    unstable: tuple[str, ...]
    # limits that attract a measure-zero set only (the saddle in the bistable case)
    exceptional: tuple[Attractor, ...] = ()

    @property
    def limits_for_attribution(self) -> tuple[Attractor, ...]:
        return self.predicted_limits + self.exceptional


def _table(s12: int, s21: int) -> CaseKind:
    if s12 == 0 and s21 == 0:
        return CaseKind.I_DegenerateLine
    if s12 < 0 < s21:
        return CaseKind.II_ExclusionYWins
    if s21 < 0 < s12:
        return CaseKind.II_ExclusionXWins
    if s12 < 0 and s21 < 0:
        return CaseKind.III_Bistable
    if s12 > 0 and s21 > 0:
        return CaseKind.IV_Coexistence
    # exactly one efficiency vanishes: the interior equilibrium has merged
    # with a boundary one; the nonzero sign picks the surviving species
    if s12 == 0:
        return CaseKind.II_ExclusionYWins if s21 > 0 else CaseKind.II_ExclusionXWins
    return CaseKind.II_ExclusionXWins if s12 > 0 else CaseKind.II_ExclusionYWins


def classify(p: CompetitionParams) -> CasePrediction:
    eff = efficiencies(p)
    case = _table(*eff.signs(p))
    e1 = Attractor("E1", Point(p.K1, 0.0))
    e2 = Attractor("E2", Point(0.0, p.K2))
    if case is CaseKind.I_DegenerateLine:
        seg = Segment(Point(0.0, p.r1 / p.alpha1), Point(p.K1, 0.0), "h")
        return CasePrediction(case, eff, (Attractor("segment", segment=seg),), ("E0",))
    if case is CaseKind.II_ExclusionYWins:
        return CasePrediction(case, eff, (e2,), ("E0", "E1"))
    if case is CaseKind.II_ExclusionXWins:
        return CasePrediction(case, eff, (e1,), ("E0", "E2"))
    estar = Attractor("E*", coexistence_point(p))
    if case is CaseKind.III_Bistable:
        return CasePrediction(case, eff, (e1, e2), ("E0", "E*"), exceptional=(estar,))
    return CasePrediction(case, eff, (estar,), ("E0", "E1", "E2"))


def mirror(p: CompetitionParams) -> CompetitionParams:
    """Parameters of the same model with the two species swapped."""
    return CompetitionParams(r1=p.r2, r2=p.r1, K1=p.K2, K2=p.K1, alpha1=p.alpha2, alpha2=p.alpha1)


def default_box(p: CompetitionParams) -> tuple[float, float, float, float]:
    return competition(p).default_bbox()


# ---------------------------------------------------------------- sign lemmas

class CaseMismatch(ValueError):
    pass


@dataclass
class LemmaCheck:
    name: str
    operator: str
    region: str
    expected: int  # +1 or -1
    n_cells: int
    violations: list[Point] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class SignLemmaReport:
    case: CaseKind
    grid: int
    checks: list[LemmaCheck]
    mirrored: bool = False

    @property
    def violations(self) -> int:
        return sum(len(c.violations) for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def verify_sign_lemmas(p: CompetitionParams, n: int = 200, band_cells: float = 1.5,
                       box: tuple[float, float, float, float] | None = None) -> SignLemmaReport:
    """Evaluate both operators on an ``n`` x ``n`` grid of cell centres.

    Every cell is checked against each sign claim whose region contains it,
    after discarding cells within ``band_cells`` of a nullcline or of the
    vertical/horizontal line through the interior equilibrium used to split
    a region. When the X species wins, the check is run on the mirrored
    parameters, where the Y species wins.
    """
    case = classify(p).case
    mirrored = case is CaseKind.II_ExclusionXWins
    if mirrored:
        p = mirror(p)
        case = CaseKind.II_ExclusionYWins
        box = None if box is None else (box[2], box[3], box[0], box[1])
    x0, x1, y0, y1 = box if box is not None else default_box(p)
    dx, dy = (x1 - x0) / n, (y1 - y0) / n
    xs = x0 + (np.arange(n) + 0.5) * dx
    ys = y0 + (np.arange(n) + 0.5) * dy
    X, Y = np.meshgrid(xs, ys)
    h, k = competition_nullclines(p)
    q = competition_quadratics(p)
    with np.errstate(all="ignore"):
        Lh, Lk = q.L_h(X, Y), q.L_k(X, Y)
    sh, sk = h.side(X, Y), k.side(X, Y)
    far = (np.abs(sh) > band_cells * h.unit_scale(dx, dy)) & (np.abs(sk) > band_cells * k.unit_scale(dx, dy))
    interior = (X > 0) & (Y > 0) & far
    above_h, below_h = sh > 0, sh < 0
    above_k, below_k = sk > 0, sk < 0
    regions: dict[str, np.ndarray] = {}
    if case is CaseKind.I_DegenerateLine:
        regions = {"R1": below_h, "R2": above_h}
        claims = [("a", "h", "R1", -1), ("a", "h", "R2", +1), ("b", "k", "R1", -1), ("b", "k", "R2", +1)]
        name = "coincident-lines-signs"
    elif case is CaseKind.II_ExclusionYWins:
        regions = {"R1": below_h, "R2": above_h & below_k, "R3": above_k}
        claims = [("a", "h", "R2", +1), ("a", "h", "R3", +1), ("b", "k", "R1", -1), ("b", "k", "R2", -1)]
        name = "exclusion-signs"
    else:
        xs_, ys_ = coexistence_point(p)
        off_x = np.abs(X - xs_) > band_cells * dx
        off_y = np.abs(Y - ys_) > band_cells * dy
        r1 = below_h & below_k
        r3 = above_h & above_k
        regions = {
            "R1": r1, "R3": r3,
            "R1_2": r1 & (X > xs_) & off_x, "R1_4": r1 & (Y > ys_) & off_y,
            "R3_2": r3 & (Y < ys_) & off_y, "R3_4": r3 & (X < xs_) & off_x,
        }
        if case is CaseKind.III_Bistable:
            regions["R2"] = above_k & below_h
            regions["R4"] = above_h & below_k
            claims = [("a", "h", "R4", +1), ("a", "h", "R3_4", +1), ("b", "h", "R2", -1), ("b", "h", "R1_2", -1),
                      ("c", "k", "R2", +1), ("c", "k", "R3_2", +1), ("d", "k", "R4", -1), ("d", "k", "R1_4", -1)]
            name = "bistable-signs"
        else:
            regions["R2"] = above_h & below_k
            regions["R4"] = above_k & below_h
            claims = [("a", "h", "R4", -1), ("a", "h", "R1_4", -1), ("b", "h", "R2", +1), ("b", "h", "R3_2", +1),
                      ("c", "k", "R4", +1), ("c", "k", "R3_4", +1), ("d", "k", "R2", -1), ("d", "k", "R1_2", -1)]
            name = "coexistence-signs"
    checks = []
    for part, op, reg, sign in claims:
        mask = regions[reg] & interior
        vals = (Lh if op == "h" else Lk)[mask]
        bad = ~(sign * vals > 0)
        pts = np.column_stack([X[mask][bad], Y[mask][bad]])
        checks.append(LemmaCheck(f"{name} {part}", f"L_{op}", reg, sign, int(mask.sum()),
                                 [Point(float(a), float(b)) for a, b in pts]))
    return SignLemmaReport(case, n, checks, mirrored)


# ---------------------------------------------------------------- global outcome

@dataclass
class ConvergenceStats:
    n_orbits: int
    counts: dict[str, int]
    unresolved: int
    nonfinite: int
    max_steps: int
    tol: float
    steps_needed: int  # latest attribution step over all orbits
    unresolved_starts: list[Point] = field(default_factory=list)
    boundary_ok: bool | None = None

    def fraction(self, name: str) -> float:
        return self.counts.get(name, 0) / self.n_orbits if self.n_orbits else 0.0

    def as_dict(self) -> dict:
        return {
            "n_orbits": self.n_orbits, "counts": dict(self.counts), "unresolved": self.unresolved,
            "nonfinite": self.nonfinite, "max_steps": self.max_steps, "tol": self.tol,
            "steps_needed": self.steps_needed, "boundary_ok": self.boundary_ok,
        }


def attribute_orbits(m, starts: np.ndarray, attractors, max_steps: int, tol: float,
                     window: int = ATTRIBUTION_WINDOW):
    """Iterate ``starts`` and attribute each orbit to an attractor.

    An orbit is attributed to the first attractor it stays within ``tol``
    of for ``window`` consecutive iterates. Returns per-orbit attractor
    index (-1 unresolved, -2 non-finite), the step of attribution and the
    final points.
    """
    x, y = starts[:, 0].astype(float).copy(), starts[:, 1].astype(float).copy()
    n = len(x)
    who = np.full(n, -1)
    when = np.zeros(n, dtype=int)
    run = np.zeros((len(attractors), n), dtype=int)
    active = np.ones(n, dtype=bool)
    with np.errstate(all="ignore"):
        for t in range(1, max_steps + 1):
            idx = np.nonzero(active)[0]
            if len(idx) == 0:
                break
            xa, ya = x[idx], y[idx]
            xa, ya = m.F(xa, ya), m.G(xa, ya)
            x[idx], y[idx] = xa, ya
            bad = ~(np.isfinite(xa) & np.isfinite(ya))
            if bad.any():
                who[idx[bad]] = -2
                active[idx[bad]] = False
            for a, att in enumerate(attractors):
                near = att.distance(xa, ya) < tol
                run[a, idx] = np.where(near, run[a, idx] + 1, 0)
            for a in range(len(attractors)):
                done = active[idx] & (run[a, idx] >= window)
                if done.any():
                    who[idx[done]] = a
                    when[idx[done]] = t
                    active[idx[done]] = False
    return who, when, np.column_stack([x, y])


def verify_global_outcome(p: CompetitionParams, n_orbits: int = 1000, max_steps: int = 10_000, tol: float = 1e-6,
                          box: tuple[float, float, float, float] | None = None, seed: int = 0,
                          window: int = ATTRIBUTION_WINDOW, check_boundary: bool = True) -> ConvergenceStats:
    """Simulate low-discrepancy interior starts and count where they end up."""
    pred = classify(p)
    atts = pred.limits_for_attribution
    m = competition(p)
    starts = quasi_random_box(n_orbits, box if box is not None else default_box(p), seed=seed)
    who, when, _ = attribute_orbits(m, starts, atts, max_steps, tol, window)
    counts = {a.name: int((who == i).sum()) for i, a in enumerate(atts)}
    unresolved = who == -1
    stats = ConvergenceStats(
        n_orbits=n_orbits,
        counts=counts,
        unresolved=int(unresolved.sum()),
        nonfinite=int((who == -2).sum()),
        max_steps=max_steps,
        tol=tol,
        steps_needed=int(when.max()) if len(when) else 0,
        unresolved_starts=[Point(float(a), float(b)) for a, b in starts[who < 0][:20]],
    )
    if check_boundary:
        stats.boundary_ok = verify_boundary(p)
    return stats


def verify_boundary(p: CompetitionParams, n: int = 50, steps: int = 2000, tol: float = 1e-9) -> bool:
    """Axis starts converge monotonically to the carrying capacity of the surviving species."""
    m = competition(p)
    ok = True
    for axis, cap in ((0, p.K1), (1, p.K2)):
        vals = np.linspace(0.0, 3.0 * cap, n + 1)[1:]
        x = vals.copy() if axis == 0 else np.zeros(n)
        y = vals.copy() if axis == 1 else np.zeros(n)
        prev_gap = np.abs(vals - cap)
        for _ in range(steps):
            x, y = m.F(x, y), m.G(x, y)
            other = y if axis == 0 else x
            cur = x if axis == 0 else y
            gap = np.abs(cur - cap)
            if np.any(other != 0) or np.any(gap > prev_gap + 1e-15):
                return False
            prev_gap = gap
        ok &= bool(np.all(prev_gap < tol))
    # the origin is fixed
    ok &= m.F(0.0, 0.0) == 0.0 and m.G(0.0, 0.0) == 0.0
    return bool(ok)


# ---------------------------------------------------------------- line of equilibria

@dataclass
class Case1Demo:
    segment_points: list[Point]
    eigenvalues: list[tuple[complex, complex]]
    rectangles: list[tuple[float, float, float, float]]
    starts: int
    exits: int
    max_limit_distance: float

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [[abs(a), abs(b)] for a, b in self.eigenvalues],
            "rectangles": [list(r) for r in self.rectangles],
            "starts": self.starts, "exits": self.exits,
            "max_limit_distance": self.max_limit_distance,
        }


def case1_stability_demo(p: CompetitionParams, n_points: int = 9, n_rects: int = 4, starts: int = 1000,
                         steps: int = 10_000, seed: int = 0) -> Case1Demo:
    """Linearisation and rectangle-trapping checks on the line of equilibria.

    (i) eigenvalues of the Jacobian at points of the segment, one of which
    is always 1; (ii) rectangles with two opposite corners on the line
    trap every orbit started inside; (iii) every such orbit ends on the
    segment.
    """
    if classify(p).case is not CaseKind.I_DegenerateLine:
        raise CaseMismatch("the demonstration needs coincident nullclines")
    m = competition(p)
    h, _ = competition_nullclines(p)
    seg = Segment(Point(0.0, p.r1 / p.alpha1), Point(p.K1, 0.0), "h")
    ts = np.linspace(0.0, p.K1, n_points + 2)[1:-1]
    pts = [Point(float(t), float(h(t))) for t in ts]
    eigs = [eig2(jacobian_at(m, q)) for q in pts]

    rects = []
    per = max(1, starts // n_rects)
    total, exits, worst = 0, 0, 0.0
    for r, xa in enumerate(np.linspace(0.15, 0.65, n_rects) * p.K1):
        xb = xa + 0.25 * p.K1
        rect = (float(xa), float(xb), float(h(xb)), float(h(xa)))
        rects.append(rect)
        s = quasi_random_box(per, rect, seed=seed + r)
        x, y = s[:, 0].copy(), s[:, 1].copy()
        out = np.zeros(len(x), dtype=bool)
        for _ in range(steps):
            x, y = m.F(x, y), m.G(x, y)
            out |= (x < rect[0]) | (x > rect[1]) | (y < rect[2]) | (y > rect[3])
        total += len(x)
        exits += int(out.sum())
        worst = max(worst, float(np.max(seg.distance(x, y))))
    return Case1Demo(pts, eigs, rects, total, exits, worst)


def coexistence_residual(p: CompetitionParams) -> float:
    """``|step(E*) - E*|`` in the max norm."""
    m = competition(p)
    xs, ys = coexistence_point(p)
    return float(max(abs(m.F(xs, ys) - xs), abs(m.G(xs, ys) - ys)))


def within_tol(a: Point, b: Point, tol: float) -> bool:
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= tol
