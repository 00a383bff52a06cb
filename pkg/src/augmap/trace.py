"""Zero-set tracing for scalar fields on a rectangle.

Marching squares at level zero on a regular grid, with every crossing
refined by bisection along its grid edge, then stitched into maximal
polylines. Ambiguous (saddle) cells are resolved by the field value at
the cell centre.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .numerics import bisect_many

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

BOTTOM, RIGHT, TOP, LEFT = "bottom", "right", "top", "left"

# Corner order: (x0,y0), (x1,y0), (x1,y1), (x0,y1). Each corner touches two edges.
_CORNER_EDGES = ((BOTTOM, LEFT), (BOTTOM, RIGHT), (RIGHT, TOP), (TOP, LEFT))

# Unambiguous marching-squares cases, keyed by the bitmask of positive corners.
_CASES: dict[int, tuple[tuple[str, str], ...]] = {
    0: (), 15: (),
    1: ((BOTTOM, LEFT),), 14: ((BOTTOM, LEFT),),
    2: ((BOTTOM, RIGHT),), 13: ((BOTTOM, RIGHT),),
    4: ((RIGHT, TOP),), 11: ((RIGHT, TOP),),
    8: ((TOP, LEFT),), 7: ((TOP, LEFT),),
    3: ((LEFT, RIGHT),), 12: ((LEFT, RIGHT),),
    6: ((BOTTOM, TOP),), 9: ((BOTTOM, TOP),),
}
_SADDLES = (5, 10)


@dataclass(frozen=True)
class TraceConfig:
    bbox: tuple[float, float, float, float]
    grid_nx: int = 512
    grid_ny: int = 512
    refine_tol: float = 1e-10

    def __post_init__(self):
        x0, x1, y0, y1 = self.bbox
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"bbox must have positive area, got {self.bbox}")
        if self.grid_nx < 16 or self.grid_ny < 16:
            raise ValueError("grid counts must be at least 16")

    @property
    def cell(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.bbox
        return (x1 - x0) / self.grid_nx, (y1 - y0) / self.grid_ny

    @property
    def cell_diagonal(self) -> float:
        dx, dy = self.cell
        return float(np.hypot(dx, dy))


@dataclass
class Polyline:
    points: np.ndarray
    closed: bool = False

    def arc_length(self) -> float:
        d = np.diff(self.points, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def __len__(self):
        return len(self.points)


@dataclass
class TraceResult:
    polylines: list[Polyline] = field(default_factory=list)
    masked_cells: int = 0

    @property
    def empty(self) -> bool:
        return not self.polylines

    def __iter__(self):
        return iter(self.polylines)

    def __len__(self):
        return len(self.polylines)

    def vertices(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 2))
        return np.vstack([p.points for p in self.polylines])


def saddle_disambiguation(corners, center: float, refine_tol: float = 1e-10,
                          subsample: Callable[[float, float], float] | None = None,
                          depth: int = 0, max_depth: int = 2) -> tuple[tuple[str, str], tuple[str, str]]:
    """Pair up the four crossed edges of an ambiguous cell.

    ``corners`` are the field values in the order (x0,y0), (x1,y0),
    (x1,y1), (x0,y1). The corners whose sign differs from the centre value
    are cut off, each by a segment joining its two edges. A centre value
    within ``refine_tol`` of zero is replaced by the mean over the four
    quarter-cell centres (via ``subsample(u, v)`` in cell-relative
    coordinates) and the decision is retried; without a sampler, or past
    ``max_depth``, the centre counts as positive.
    """
    if abs(center) <= refine_tol:
        if subsample is not None and depth < max_depth:
            q = 0.5 ** (depth + 2)
            vals = [subsample(0.5 + sx * q, 0.5 + sy * q) for sx in (-1, 1) for sy in (-1, 1)]
            return saddle_disambiguation(corners, float(np.mean(vals)), refine_tol, subsample, depth + 1, max_depth)
        center = 1.0
    center_pos = center > 0
    cut = [i for i, v in enumerate(corners) if (v > 0) != center_pos]
    return tuple(_CORNER_EDGES[i] for i in cut)  # type: ignore[return-value]


def trace_zero_set(f: ScalarField, cfg: TraceConfig) -> TraceResult:
    """Polylines approximating ``{f = 0}`` inside ``cfg.bbox``.

    Every vertex lies on a grid edge where ``f`` changes sign, refined to
    machine precision along that edge. Closed loops repeat their first
    point at the end. Cells touching a non-finite sample are skipped and
    counted in ``masked_cells``.
    """
    x0, x1, y0, y1 = cfg.bbox
    nx, ny = cfg.grid_nx, cfg.grid_ny
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # [j, i] = (xs[i], ys[j])
    with np.errstate(all="ignore"):
        V = np.asarray(f(X, Y), dtype=float)
    finite = np.isfinite(V)
    pos = V > 0

    cell_ok = finite[:-1, :-1] & finite[:-1, 1:] & finite[1:, :-1] & finite[1:, 1:]
    masked = int((~cell_ok).sum())

    # Edge crossings. Horizontal edge (j, i): corners (j, i)-(j, i+1); vertical (j, i): (j, i)-(j+1, i).
    h_cross = (pos[:, :-1] != pos[:, 1:]) & finite[:, :-1] & finite[:, 1:]
    v_cross = (pos[:-1, :] != pos[1:, :]) & finite[:-1, :] & finite[1:, :]
    n_h = (ny + 1) * nx

    def h_id(j, i):
        return j * nx + i

    def v_id(j, i):
        return n_h + j * (nx + 1) + i

    hj, hi = np.nonzero(h_cross)
    vj, vi = np.nonzero(v_cross)
    a = np.concatenate([np.column_stack([xs[hi], ys[hj]]), np.column_stack([xs[vi], ys[vj]])])
    b = np.concatenate([np.column_stack([xs[hi + 1], ys[hj]]), np.column_stack([xs[vi], ys[vj + 1]])])
    a_pos = np.concatenate([pos[hj, hi], pos[vj, vi]])
    lo = np.where(a_pos[:, None], b, a)
    hi_pt = np.where(a_pos[:, None], a, b)
    ids = np.concatenate([h_id(hj, hi), v_id(vj, vi)])
    vertex: dict[int, np.ndarray] = {}
    if len(ids):
        with np.errstate(all="ignore"):
            refined = bisect_many(lambda x, y: np.asarray(f(x, y), dtype=float), lo, hi_pt)
        vertex = {int(k): refined[n] for n, k in enumerate(ids)}

    # Segments per cell.
    mask = (pos[:-1, :-1].astype(int) | (pos[:-1, 1:].astype(int) << 1)
            | (pos[1:, 1:].astype(int) << 2) | (pos[1:, :-1].astype(int) << 3))
    segments: list[tuple[int, int]] = []
    cj, ci = np.nonzero(cell_ok & (mask != 0) & (mask != 15))
    dx, dy = cfg.cell
    for j, i in zip(cj.tolist(), ci.tolist()):
        edge = {BOTTOM: h_id(j, i), TOP: h_id(j + 1, i), LEFT: v_id(j, i), RIGHT: v_id(j, i + 1)}
        case = int(mask[j, i])
        if case in _SADDLES:
            cx, cy = xs[i] + 0.5 * dx, ys[j] + 0.5 * dy
            with np.errstate(all="ignore"):
                center = float(f(np.float64(cx), np.float64(cy)))
            corners = (V[j, i], V[j, i + 1], V[j + 1, i + 1], V[j + 1, i])

            def sub(u, v, _x=xs[i], _y=ys[j]):
                with np.errstate(all="ignore"):
                    return float(f(np.float64(_x + u * dx), np.float64(_y + v * dy)))

            pairs = saddle_disambiguation(corners, center, cfg.refine_tol, sub)
        else:
            pairs = _CASES[case]
        for e1, e2 in pairs:
            segments.append((edge[e1], edge[e2]))

    return TraceResult(_assemble(segments, vertex), masked)


def _assemble(segments: list[tuple[int, int]], vertex: dict[int, np.ndarray]) -> list[Polyline]:
    nbrs: dict[int, list[int]] = {}
    for u, v in segments:
        nbrs.setdefault(u, []).append(v)
        nbrs.setdefault(v, []).append(u)
    seen: set[int] = set()
    out: list[Polyline] = []

    def walk(start: int) -> tuple[list[int], bool]:
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [w for w in nbrs[cur] if w != prev]
            if prev is None:
                nxt = nbrs[cur][:1]
            step_to = None
            for w in nxt:
                if w == start and len(chain) > 2:
                    return chain, True
                if w not in seen:
                    step_to = w
                    break
            if step_to is None:
                return chain, False
            seen.add(step_to)
            chain.append(step_to)
            prev, cur = cur, step_to

    # open chains start at degree-1 nodes; whatever is left forms loops
    for node in sorted(nbrs):
        if node not in seen and len(nbrs[node]) == 1:
            chain, closed = walk(node)
            out.append(_polyline(chain, closed, vertex))
    for node in sorted(nbrs):
        if node not in seen:
            chain, closed = walk(node)
            out.append(_polyline(chain, closed, vertex))
    return out


def _polyline(chain: list[int], closed: bool, vertex: dict[int, np.ndarray]) -> Polyline:
    pts = np.array([vertex[n] for n in chain])
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return Polyline(pts, closed)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    if len(a) == 0 or len(b) == 0:
        return float("inf") if len(a) != len(b) else 0.0
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def densify(points: np.ndarray, spacing: float) -> np.ndarray:
    """Insert points along a polyline so consecutive samples are at most ``spacing`` apart."""
    out = [points[:1]]
    for p, q in zip(points[:-1], points[1:]):
        n = max(1, int(np.ceil(np.hypot(*(q - p)) / spacing)))
        t = np.linspace(0, 1, n + 1)[1:, None]
        out.append(p + t * (q - p))
    return np.vstack(out)
