"""Grid decomposition of the phase plane into sign-constant regions.

A region is a 4-connected component of grid cells that no curve passes
through, after removing a safety band around every curve. Each region is
labelled with the sign pattern sampled at its cell centres: the discrete
direction field, the next-iterate operator signs and the side of each
nontrivial nullcline. The module also certifies positive invariance
(by the sign argument when it applies, by orbit sampling otherwise),
flags sign configurations that allow jumping between the regions below
and above both nullclines, and checks the competition-model box lemmas.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .models import CompetitionParams, Family, PlanarMap, Point, competition
from .next_iterate import NextIterateOperator, operators_for
from .nullclines import (
    DirectionSigns,
    NullclineCurve,
    Sign,
    UnsupportedFamily,
    coexistence_point,
    competition_nullclines,
    efficiencies,
    model_nullclines,
)
from .numerics import quasi_random_box
from .trace import TraceConfig

BAND_CELLS = 1.5


class InconsistentSigns(RuntimeError):
    """A connected component carries more than one value of a sign that should be constant."""

    def __init__(self, region: int, what: str):
        super().__init__(f"region {region}: {what} is not constant; refine the grid")
        self.region = region
        self.what = what


@dataclass
class SignedRegion:
    id: int
    cells: np.ndarray  # flat indices into the (ny, nx) cell grid
    direction: DirectionSigns
    op_signs: dict[str, Sign | None]  # None: the operator changes sign inside
    sides: dict[str, Sign]  # + above (or right of) the nullcline
    adjacency: frozenset[int]
    area_fraction: float
    representative: Point
    touches: frozenset[str]  # bbox edges the region reaches

    @property
    def size(self) -> int:
        return len(self.cells)

    def op_pattern(self) -> str:
        return "".join("?" if s is None else s.glyph for s in self.op_signs.values())

    def side_pattern(self) -> tuple:
        return tuple(self.sides.items())

    def below_all(self) -> bool:
        return bool(self.sides) and all(s is Sign.MINUS for s in self.sides.values())

    def above_all(self) -> bool:
        return bool(self.sides) and all(s is Sign.PLUS for s in self.sides.values())


@dataclass
class Decomposition:
    map: PlanarMap
    cfg: TraceConfig
    nullclines: list[NullclineCurve]
    operators: list[NextIterateOperator]
    labels: np.ndarray  # (ny, nx); -1 on curve and band cells
    regions: list[SignedRegion]
    with_roots: bool

    def region(self, rid: int) -> SignedRegion:
        return self.regions[rid]

    def cell_of(self, x, y):
        x0, x1, y0, y1 = self.cfg.bbox
        dx, dy = self.cfg.cell
        i = np.floor((np.asarray(x, dtype=float) - x0) / dx).astype(int)
        j = np.floor((np.asarray(y, dtype=float) - y0) / dy).astype(int)
        return j, i

    def label_at(self, x, y):
        """Region label of the cell containing each point; -1 in a band, -2 outside the box."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        finite = np.isfinite(x) & np.isfinite(y)
        x0, x1, y0, y1 = self.cfg.bbox
        # park non-finite and far-away points just outside the box so the integer cast is safe
        j, i = self.cell_of(np.where(finite, np.clip(x, x0 - 1, x1 + 1), x0 - 1),
                            np.where(finite, np.clip(y, y0 - 1, y1 + 1), y0 - 1))
        ny, nx = self.labels.shape
        inside = finite & (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.full(np.shape(i), -2)
        out[inside] = self.labels[j[inside], i[inside]]
        return out

    def with_pattern(self, sides: dict[str, Sign]) -> list[SignedRegion]:
        return [r for r in self.regions if r.sides == sides]


def _signs(v: np.ndarray) -> np.ndarray:
    return np.sign(v)


def _cut_cells(corners: np.ndarray, centers: np.ndarray) -> np.ndarray:
    s = np.stack([np.sign(corners[:-1, :-1]), np.sign(corners[:-1, 1:]),
                  np.sign(corners[1:, :-1]), np.sign(corners[1:, 1:]), np.sign(centers)])
    bad = np.isnan(s).any(axis=0)
    s = np.nan_to_num(s, nan=0.0)
    return bad | (s == 0).any(axis=0) | ((s.max(axis=0) > 0) & (s.min(axis=0) < 0))


def _merge_by_sides(labels: np.ndarray, n: int, centers: list[np.ndarray]) -> tuple[np.ndarray, int]:
    if n == 0:
        return labels, n
    index = np.arange(n)
    per_field = [np.sign(ndimage.median(c, labels, index)).astype(int) for c in centers]
    per_region = list(zip(*per_field))
    new_id: dict[tuple, int] = {}
    mapping = np.empty(n + 1, dtype=int)
    mapping[-1] = -1
    for rid, key in enumerate(per_region):
        mapping[rid] = new_id.setdefault(key, len(new_id))
    return mapping[labels], len(new_id)


def decompose(m: PlanarMap, cfg: TraceConfig | None = None, nullclines: list[NullclineCurve] | None = None,
              operators: list[NextIterateOperator] | None = None, with_roots: bool = True,
              band_cells: float = BAND_CELLS, strict: bool = True) -> Decomposition:
    """Split ``cfg.bbox`` into regions of constant sign.

    With ``with_roots`` the cuts are the nontrivial nullclines and the zero
    sets of their next-iterate operators; without, only the nullclines, so
    regions are those bounded by nullclines (their operator signs may be
    mixed and are then reported as ``None``). Maps without closed-form
    nullclines are cut along the zero sets of ``F - X`` and ``G - Y``.
    """
    if cfg is None:
        cfg = TraceConfig(m.default_bbox())
    if nullclines is None:
        try:
            nullclines = model_nullclines(m)
        except UnsupportedFamily:
            nullclines = []
    if operators is None:
        operators = operators_for(m, nullclines) if nullclines else []

    x0, x1, y0, y1 = cfg.bbox
    nx, ny = cfg.grid_nx, cfg.grid_ny
    dx, dy = cfg.cell
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    XC, YC = np.meshgrid(xs, ys)
    XM, YM = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]))

    def sample(f):
        with np.errstate(all="ignore"):
            return np.asarray(f(XC, YC), dtype=float), np.asarray(f(XM, YM), dtype=float)

    dir_x = sample(lambda x, y: m.F(x, y) - x)
    dir_y = sample(lambda x, y: m.G(x, y) - y)
    side_fields = {nc.label: sample(nc.side) for nc in nullclines}
    op_fields = {op.label: sample(op) for op in operators}

    cut_by = list(side_fields.values()) if nullclines else [dir_x, dir_y]
    if with_roots:
        cut_by += list(op_fields.values())
    cut = np.zeros((ny, nx), dtype=bool)
    for corners, centers in cut_by:
        cut |= _cut_cells(corners, centers)
    iterations = max(0, int(math.ceil(band_cells - 0.5)))
    excluded = ndimage.binary_dilation(cut, structure=np.ones((3, 3), bool), iterations=iterations) if iterations else cut

    labels, n = ndimage.label(~excluded)  # default structure is 4-connectivity
    labels = labels - 1  # background becomes -1
    if not with_roots and nullclines and all(nc.slope is not None for nc in nullclines):
        # side patterns of straight nullclines are convex, so pieces split off by the band belong together
        labels, n = _merge_by_sides(labels, n, [c for _, c in side_fields.values()])
    index = np.arange(n)

    def constant(values: np.ndarray, what: str, required: bool):
        s = np.nan_to_num(_signs(values), nan=0.0)
        lo = ndimage.minimum(s, labels, index) if n else np.empty(0)
        hi = ndimage.maximum(s, labels, index) if n else np.empty(0)
        out = []
        for rid in range(n):
            if lo[rid] == hi[rid]:
                out.append(Sign(int(lo[rid])))
            elif required and strict:
                raise InconsistentSigns(rid, what)
            else:
                out.append(None)
        return out

    dxs = constant(dir_x[1], "sign of F-X", True)
    dys = constant(dir_y[1], "sign of G-Y", True)
    sides = {lab: constant(c, f"side of {lab}", True) for lab, (_, c) in side_fields.items()}
    ops = {lab: constant(c, f"sign of L_{lab}", with_roots) for lab, (_, c) in op_fields.items()}

    counts = np.bincount(labels[labels >= 0].ravel(), minlength=n) if n else np.zeros(0, int)
    cx = ndimage.mean(XM, labels, index) if n else []
    cy = ndimage.mean(YM, labels, index) if n else []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], index)
    regions = []
    grown = 2 * iterations + 2
    for rid in range(n):
        cells = order[starts[rid]:starts[rid] + counts[rid]]
        mask = labels == rid
        near = ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool), iterations=grown)
        adj = set(np.unique(labels[near]).tolist()) - {rid, -1}
        d2 = (XM.ravel()[cells] - cx[rid]) ** 2 + (YM.ravel()[cells] - cy[rid]) ** 2
        rep = cells[int(np.argmin(d2))]
        touches = set()
        if mask[:, 0].any():
            touches.add("left")
        if mask[:, -1].any():
            touches.add("right")
        if mask[0, :].any():
            touches.add("bottom")
        if mask[-1, :].any():
            touches.add("top")
        regions.append(SignedRegion(
            id=rid,
            cells=cells,
            direction=DirectionSigns(dxs[rid], dys[rid]),
            op_signs={lab: v[rid] for lab, v in ops.items()},
            sides={lab: v[rid] for lab, v in sides.items()},
            adjacency=frozenset(adj),
            area_fraction=float(counts[rid]) / (nx * ny),
            representative=Point(float(XM.ravel()[rep]), float(YM.ravel()[rep])),
            touches=frozenset(touches),
        ))
    return Decomposition(m, cfg, list(nullclines), list(operators), labels, regions, with_roots)


# ---------------------------------------------------------------- invariance

class Verdict(enum.Enum):
    PROVEN_BY_SIGNS = "ProvenBySigns"
    EMPIRICALLY_SUPPORTED = "EmpiricallySupported"
    COUNTEREXAMPLE = "Counterexample"


@dataclass(frozen=True)
class InvarianceVerdict:
    region: int
    verdict: Verdict
    samples: int = 0
    steps: int = 0
    point: Point | None = None  # counterexample start
    exit_step: int | None = None  # 1-based step at which the orbit is first outside

    def as_dict(self) -> dict:
        d = {"region": self.region, "verdict": self.verdict.value}
        if self.verdict is Verdict.EMPIRICALLY_SUPPORTED:
            d.update(samples=self.samples, steps=self.steps)
        if self.verdict is Verdict.COUNTEREXAMPLE:
            d.update(point=[self.point.x, self.point.y], exit_step=self.exit_step)
        return d


def _pattern_unique(decomp: Decomposition, region: SignedRegion) -> bool:
    return len(decomp.with_pattern(region.sides)) == 1


MEMBERSHIP_RTOL = 1e-9


def membership(decomp: Decomposition, region: SignedRegion):
    """Vectorised membership test for ``region``.

    When the region is the only one with its side pattern, membership is
    exact: open first quadrant and the closed side of every nullcline,
    up to a relative rounding allowance so that orbits converging onto a
    nullcline are not reported as leaving.
    Otherwise it falls back to the grid labels, treating band cells as
    undecided (inside) so that only unambiguous exits count.
    """
    if decomp.nullclines and _pattern_unique(decomp, region):
        ncs = [(nc, int(region.sides[nc.label])) for nc in decomp.nullclines]
        x0, x1, y0, y1 = decomp.cfg.bbox
        tol = MEMBERSHIP_RTOL * max(x1 - x0, y1 - y0)

        def inside(x, y):
            with np.errstate(all="ignore"):
                ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
                for nc, s in ncs:
                    ok &= s * nc.side(x, y) >= -tol
            return ok
        return inside

    def inside_by_label(x, y):
        lab = decomp.label_at(x, y)
        return (lab == region.id) | (lab == -1)
    return inside_by_label


def _sign_certificate(decomp: Decomposition, region: SignedRegion) -> bool:
    """The two-sided sign argument, checked on every grid node and cell centre of the region.

    For each nullcline the image must land on the region's own side, i.e.
    the operator's sign must equal the side sign wherever the side pattern
    holds. Only applies to built-in maps (images of the open quadrant stay
    in it), to side patterns realised by a single region, and to regions
    that do not run off the top or right of the box.
    """
    m = decomp.map
    if m.family is Family.GENERIC or not decomp.nullclines:
        return False
    if not _pattern_unique(decomp, region) or region.touches & {"top", "right"}:
        return False
    x0, x1, y0, y1 = decomp.cfg.bbox
    nx, ny = decomp.cfg.grid_nx, decomp.cfg.grid_ny
    xs = np.linspace(x0, x1, 2 * nx + 1)
    ys = np.linspace(y0, y1, 2 * ny + 1)
    X, Y = np.meshgrid(xs, ys)
    inside = membership(decomp, region)(X, Y)
    if not inside.any():
        return False
    px, py = X[inside], Y[inside]
    for op in decomp.operators:
        s = int(region.sides[op.label])
        with np.errstate(all="ignore"):
            v = op(px, py)
        if not np.all(np.isfinite(v)) or np.any(s * v < 0):
            return False
    return True


def _region_samples(decomp: Decomposition, region: SignedRegion, n: int, seed: int, inside) -> np.ndarray:
    nx = decomp.cfg.grid_nx
    dx, dy = decomp.cfg.cell
    x0, _, y0, _ = decomp.cfg.bbox
    j, i = np.divmod(region.cells, nx)
    box = (x0 + i.min() * dx, x0 + (i.max() + 1) * dx, y0 + j.min() * dy, y0 + (j.max() + 1) * dy)
    got: list[np.ndarray] = []
    total, batch, rounds = 0, max(4 * n, 1024), 0
    while total < n and rounds < 20:
        pts = quasi_random_box(batch, box, seed=seed + rounds)
        keep = pts[inside(pts[:, 0], pts[:, 1])]
        got.append(keep)
        total += len(keep)
        rounds += 1
    pts = np.vstack(got) if got else np.empty((0, 2))
    return pts[:n]


def _first_exit(m: PlanarMap, pts: np.ndarray, steps: int, inside):
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    exited = np.full(len(pts), -1)
    alive = np.ones(len(pts), dtype=bool)
    with np.errstate(all="ignore"):
        for t in range(1, steps + 1):
            x, y = m.F(x, y), m.G(x, y)
            out = alive & ~inside(x, y)
            exited[out] = t
            alive &= ~out
            if not alive.any():
                break
    hit = np.nonzero(exited > 0)[0]
    if len(hit) == 0:
        return None
    k = hit[0]
    return Point(float(pts[k, 0]), float(pts[k, 1])), int(exited[k])


def certify_invariance(decomp: Decomposition, region_id: int, n_samples: int = 1000, steps: int = 100,
                       seed: int = 0) -> InvarianceVerdict:
    """Positive-invariance verdict for one region of ``decomp``.

    Tries the sign certificate first. Otherwise it looks for an escaping
    orbit: cells whose operator signs send the next iterate across a
    bounding nullcline are tried first, then ``n_samples`` quasi-random
    starts are iterated ``steps`` times with membership checked after each
    step.
    """
    region = decomp.region(region_id)
    if _sign_certificate(decomp, region):
        return InvarianceVerdict(region_id, Verdict.PROVEN_BY_SIGNS)
    inside = membership(decomp, region)
    m = decomp.map

    # cell centres of the whole grid whose own operator signs point outward
    nx = decomp.cfg.grid_nx
    dx, dy = decomp.cfg.cell
    x0, _, y0, _ = decomp.cfg.bbox
    j, i = np.divmod(np.arange(decomp.labels.size), nx)
    cx, cy = x0 + (i + 0.5) * dx, y0 + (j + 0.5) * dy
    cand = inside(cx, cy)
    if decomp.operators and decomp.nullclines and region.sides:
        outward = np.zeros_like(cand)
        with np.errstate(all="ignore"):
            for op in decomp.operators:
                outward |= int(region.sides[op.label]) * op(cx, cy) < 0
        cand &= outward
        if cand.any():
            found = _first_exit(m, np.column_stack([cx[cand], cy[cand]]), 1, inside)
            if found is not None:
                return InvarianceVerdict(region_id, Verdict.COUNTEREXAMPLE, point=found[0], exit_step=found[1])

    pts = _region_samples(decomp, region, n_samples, seed, inside)
    found = _first_exit(m, pts, steps, inside)
    if found is not None:
        return InvarianceVerdict(region_id, Verdict.COUNTEREXAMPLE, samples=len(pts), steps=steps,
                                 point=found[0], exit_step=found[1])
    return InvarianceVerdict(region_id, Verdict.EMPIRICALLY_SUPPORTED, samples=len(pts), steps=steps)


def oscillation_risk(decomp: Decomposition) -> list[tuple[int, int]]:
    """Pairs (A, B): A below every nullcline with all operators positive, B above every nullcline with all negative.

    Such a pair means the signs alone allow orbits to jump back and forth
    across both nullclines.
    """
    def all_ops(r: SignedRegion, s: Sign) -> bool:
        return bool(r.op_signs) and all(v is s for v in r.op_signs.values())

    lows = [r.id for r in decomp.regions if r.below_all() and all_ops(r, Sign.PLUS)]
    highs = [r.id for r in decomp.regions if r.above_all() and all_ops(r, Sign.MINUS)]
    return [(a, b) for a in lows for b in highs]


# ---------------------------------------------------------------- box lemmas

@dataclass(frozen=True)
class BoxLemmaResult:
    holds: bool
    n_tested: int
    violations: list[Point] = field(default_factory=list)
    closest_to_coexistence: float = math.inf  # min distance of an image to E*

    def __bool__(self) -> bool:
        return self.holds


def _below_both(p: CompetitionParams, x, y):
    h, k = competition_nullclines(p)
    return (h.side(x, y) <= 0) & (k.side(x, y) <= 0)


def _above_both(p: CompetitionParams, x, y):
    h, k = competition_nullclines(p)
    return (h.side(x, y) >= 0) & (k.side(x, y) >= 0)


def d1_contains(p: CompetitionParams, x, y):
    xs, ys = coexistence_point(p)
    x, y = np.asarray(x), np.asarray(y)
    return (x > 0) & (y > 0) & (x <= xs) & (y <= ys) & _below_both(p, x, y) & ~((x == xs) & (y == ys))


def d2_contains(p: CompetitionParams, x, y):
    xs, ys = coexistence_point(p)
    x, y = np.asarray(x), np.asarray(y)
    return (x >= xs) & (y >= ys) & _above_both(p, x, y) & ~((x == xs) & (y == ys))


def box_lemma_check(p: CompetitionParams, n_samples: int = 100_000, seed: int = 0) -> BoxLemmaResult:
    """Sample the lower box below both nullclines and check no image lands in the upper box.

    Requires the efficiencies to be nonzero with the same sign, so that
    the interior equilibrium exists.
    """
    c12, c21 = efficiencies(p)
    if not c12 * c21 > 0:
        raise ValueError("box lemmas need an interior equilibrium (C12*C21 > 0)")
    xs, ys = coexistence_point(p)
    m = competition(p)
    got, total, rounds = [], 0, 0
    while total < n_samples:
        pts = quasi_random_box(2 * n_samples, (0.0, xs, 0.0, ys), seed=seed + rounds)
        keep = pts[d1_contains(p, pts[:, 0], pts[:, 1])]
        got.append(keep)
        total += len(keep)
        rounds += 1
        if rounds > 50:
            break
    pts = np.vstack(got)[:n_samples]
    fx, gy = m.F(pts[:, 0], pts[:, 1]), m.G(pts[:, 0], pts[:, 1])
    bad = d2_contains(p, fx, gy)
    viol = [Point(float(a), float(b)) for a, b in pts[bad][:10]]
    dist = float(np.min(np.hypot(fx - xs, gy - ys))) if len(pts) else math.inf
    return BoxLemmaResult(not bad.any(), len(pts), viol, dist)


# ---------------------------------------------------------------- one-step jumps

@dataclass
class JumpReport:
    double_crossings: list[tuple[Point, Point]]  # (start, image) crossing every nontrivial nullcline
    region_exits: list[tuple[int, Point, Point]]  # (region id, start, image) leaving a region between nullclines
    grid: int

    @property
    def found_double(self) -> bool:
        return bool(self.double_crossings)

    @property
    def found_exit(self) -> bool:
        return bool(self.region_exits)


def jump_demonstration(m: PlanarMap, n: int = 100, cfg: TraceConfig | None = None, keep: int = 10) -> JumpReport:
    """Grid starts whose single iterate jumps across nullclines.

    Finds starts whose image lies strictly on the other side of every
    nontrivial nullcline, and starts in a bounded region between the two
    nullclines (one side pattern + and one -) whose image leaves it.
    """
    cfg = cfg or TraceConfig(m.default_bbox())
    ncs = model_nullclines(m)
    x0, x1, y0, y1 = cfg.bbox
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    X, Y = (a.ravel() for a in np.meshgrid(xs, ys))
    with np.errstate(all="ignore"):
        FX, GY = m.F(X, Y), m.G(X, Y)
    flips = np.ones(len(X), dtype=bool)
    for nc in ncs:
        flips &= nc.side(X, Y) * nc.side(FX, GY) < 0
    doubles = [(Point(float(a), float(b)), Point(float(c), float(d)))
               for a, b, c, d in zip(X[flips], Y[flips], FX[flips], GY[flips])][:keep]

    coarse = decompose(m, cfg, ncs, with_roots=False)
    exits = []
    for r in coarse.regions:
        if len(set(r.sides.values())) < 2 or r.touches & {"top", "right"}:
            continue
        inside = membership(coarse, r)
        start_in = inside(X, Y)
        out = start_in & ~inside(FX, GY)
        for a, b, c, d in list(zip(X[out], Y[out], FX[out], GY[out]))[:keep]:
            exits.append((r.id, Point(float(a), float(b)), Point(float(c), float(d))))
    return JumpReport(doubles, exits, n)
