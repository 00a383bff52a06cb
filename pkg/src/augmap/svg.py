"""Deterministic SVG rendering of augmented phase portraits.

Conventions: nullclines dashed, root curves solid; curves belonging to
the X-equation are black and those of the Y-equation gray; operator
signs are drawn as "+"/"-" glyphs in the matching colour. Coordinates are
written with fixed precision so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from html import escape

import numpy as np

from .models import Family, PlanarMap, orbit
from .next_iterate import closed_form_root_curves, operators_for
from .nullclines import Equation, Orientation, UnsupportedFamily, equilibria, model_nullclines
from .regions import decompose
from .trace import TraceConfig, trace_zero_set

BLACK = "#000000"
GRAY = "#808080"
WIDTH = HEIGHT = 560
MARGIN = 48
ARROW_GRID = 12


def _color(eq: Equation) -> str:
    return BLACK if eq is Equation.X else GRAY


class _Frame:
    def __init__(self, bbox):
        self.x0, self.x1, self.y0, self.y1 = bbox
        self.w = WIDTH - 2 * MARGIN
        self.h = HEIGHT - 2 * MARGIN

    def px(self, x, y) -> tuple[float, float]:
        u = MARGIN + (x - self.x0) / (self.x1 - self.x0) * self.w
        v = HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * self.h
        return u, v

    def inside(self, x, y) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _path(frame: _Frame, pts: np.ndarray) -> list[str]:
    """SVG path data for a polyline, split wherever it leaves the box or is undefined."""
    out, cur = [], []
    for x, y in pts:
        if np.isfinite(x) and np.isfinite(y) and frame.inside(x, y):
            u, v = frame.px(x, y)
            cur.append(f"{'M' if not cur else 'L'}{_f(u)},{_f(v)}")
        elif cur:
            out.append(" ".join(cur))
            cur = []
    if cur:
        out.append(" ".join(cur))
    return [d for d in out if " " in d]


def render_portrait(m: PlanarMap, cfg: TraceConfig | None = None, orbits: list[tuple[float, float, int]] = (),
                    title: str | None = None) -> str:
    cfg = cfg or TraceConfig(m.default_bbox(), 256, 256)
    fr = _Frame(cfg.bbox)
    try:
        ncs = model_nullclines(m)
    except UnsupportedFamily:
        ncs = []
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
    ]
    if title:
        parts.append(f'<text class="title" x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')

    # axes
    ax0, ay0 = fr.px(fr.x0, fr.y0)
    ax1, _ = fr.px(fr.x1, fr.y0)
    _, ay1 = fr.px(fr.x0, fr.y1)
    parts.append('<g class="axes" stroke="#000000" stroke-width="1">')
    parts.append(f'<line x1="{_f(ax0)}" y1="{_f(ay0)}" x2="{_f(ax1)}" y2="{_f(ay0)}"/>')
    parts.append(f'<line x1="{_f(ax0)}" y1="{_f(ay0)}" x2="{_f(ax0)}" y2="{_f(ay1)}"/>')
    parts.append("</g>")
    parts.append(f'<text class="label" x="{_f(ax1)}" y="{_f(ay0 + 18)}" text-anchor="end" font-size="12">X ({fr.x1:.3g})</text>')
    parts.append(f'<text class="label" x="{_f(ax0 - 6)}" y="{_f(ay1)}" text-anchor="end" font-size="12">Y ({fr.y1:.3g})</text>')

    # nullclines
    parts.append('<g class="nullclines" fill="none" stroke-width="1.5" stroke-dasharray="6,4">')
    for nc in ncs:
        if nc.orientation is Orientation.EXPLICIT_IN_X:
            t = np.linspace(fr.x0, fr.x1, 513)
            pts = np.column_stack([t, nc.fn(t)])
        else:
            t = np.linspace(fr.y0, fr.y1, 513)
            pts = np.column_stack([nc.fn(t), t])
        for d in _path(fr, pts):
            parts.append(f'<path class="nullcline eq-{nc.annihilates.value}" data-label="{nc.label}" '
                         f'stroke="{_color(nc.annihilates)}" d="{d}"/>')
    if not ncs:
        for label, f, color in (("F-X", lambda x, y: m.F(x, y) - x, BLACK), ("G-Y", lambda x, y: m.G(x, y) - y, GRAY)):
            for pl in trace_zero_set(f, cfg):
                for d in _path(fr, pl.points):
                    parts.append(f'<path class="nullcline" data-label="{label}" stroke="{color}" d="{d}"/>')
    parts.append("</g>")

    # root curves
    parts.append('<g class="root-curves" fill="none" stroke-width="1.5">')
    if m.family is Family.COMPETITION:
        colors = {nc.label: nc.annihilates for nc in ncs}
        for c in closed_form_root_curves(m.params, cfg.bbox):
            if not c.in_window:
                continue
            x0, x1, y0, y1 = cfg.bbox
            t = np.linspace(x0, x1, 1025) if c.variable == "X" else np.linspace(y0, y1, 1025)
            with np.errstate(all="ignore"):
                v = c.fn(t)
            pts = np.column_stack([t, v]) if c.variable == "X" else np.column_stack([v, t])
            for d in _path(fr, pts):
                parts.append(f'<path class="root-curve eq-{colors[c.nullcline].value}" data-branch="{c.branch}" '
                             f'stroke="{_color(colors[c.nullcline])}" d="{d}"/>')
    else:
        for op in operators_for(m, ncs) if ncs else []:
            eq = op.nullcline.annihilates
            for pl in trace_zero_set(op, cfg):
                for d in _path(fr, pl.points):
                    parts.append(f'<path class="root-curve eq-{eq.value}" data-label="{op.label}" '
                                 f'stroke="{_color(eq)}" d="{d}"/>')
    parts.append("</g>")

    # sign glyphs, one per operator at each region's representative point
    parts.append('<g class="glyphs" font-size="13" text-anchor="middle">')
    if ncs:
        dec = decompose(m, cfg, ncs, strict=False)
        eqs_by_label = {nc.label: nc.annihilates for nc in ncs}
        for r in dec.regions:
            if r.area_fraction < 0.002:
                continue
            u, v = fr.px(*r.representative)
            for n, (label, s) in enumerate(r.op_signs.items()):
                if s is None:
                    continue
                parts.append(f'<text class="glyph eq-{eqs_by_label[label].value}" data-region="{r.id}" '
                             f'x="{_f(u + 9 * n - 4.5 * (len(r.op_signs) - 1))}" y="{_f(v + 4)}" '
                             f'fill="{_color(eqs_by_label[label])}">{s.glyph}</text>')
    parts.append("</g>")

    # direction field: one arrow per coarse cell pointing along (sign(F-X), sign(G-Y))
    parts.append('<g class="arrows" stroke="#404040" stroke-width="1" fill="none">')
    xs = np.linspace(fr.x0, fr.x1, ARROW_GRID + 2)[1:-1]
    ys = np.linspace(fr.y0, fr.y1, ARROW_GRID + 2)[1:-1]
    X, Y = np.meshgrid(xs, ys)
    with np.errstate(all="ignore"):
        sx = np.sign(m.F(X, Y) - X)
        sy = np.sign(m.G(X, Y) - Y)
    for x, y, a, b in zip(X.ravel(), Y.ravel(), sx.ravel(), sy.ravel()):
        if not (np.isfinite(a) and np.isfinite(b)) or (a == 0 and b == 0):
            continue
        u, v = fr.px(x, y)
        norm = math.hypot(a, b)
        du, dv = 8 * a / norm, -8 * b / norm
        hu, hv = u + du, v + dv
        # arrow head
        lu, lv = hu - 0.4 * du + 0.3 * dv, hv - 0.4 * dv - 0.3 * du
        ru, rv = hu - 0.4 * du - 0.3 * dv, hv - 0.4 * dv + 0.3 * du
        parts.append(f'<path class="arrow" d="M{_f(u - du)},{_f(v - dv)} L{_f(hu)},{_f(hv)} '
                     f'M{_f(lu)},{_f(lv)} L{_f(hu)},{_f(hv)} L{_f(ru)},{_f(rv)}"/>')
    parts.append("</g>")

    # equilibria
    eqs = equilibria(m)
    parts.append('<g class="equilibria" font-size="11">')
    if eqs.continuum is not None:
        (a, b), (c, d) = eqs.continuum.start, eqs.continuum.end
        u1, v1 = fr.px(a, b)
        u2, v2 = fr.px(c, d)
        parts.append(f'<line class="equilibrium-continuum" x1="{_f(u1)}" y1="{_f(v1)}" x2="{_f(u2)}" y2="{_f(v2)}" '
                     f'stroke="#c00000" stroke-width="3" opacity="0.5"/>')
    from .report import named_equilibria

    for name, q, kind in named_equilibria(eqs):
        if not fr.inside(q.x, q.y):
            continue
        u, v = fr.px(q.x, q.y)
        parts.append(f'<circle class="equilibrium {kind.value}" data-name="{escape(name)}" cx="{_f(u)}" cy="{_f(v)}" r="4" fill="#c00000"/>')
        parts.append(f'<text class="equilibrium-label" x="{_f(u + 6)}" y="{_f(v - 6)}">{escape(name)}</text>')
    parts.append("</g>")

    # orbits
    if orbits:
        parts.append('<g class="orbits" fill="none" stroke="#1f4fbf" stroke-width="1">')
        for x, y, n in orbits:
            pts = orbit(m, (x, y), int(n)).points
            pts = pts[np.isfinite(pts).all(axis=1)]
            coords = " ".join(f"{_f(u)},{_f(v)}" for u, v in (fr.px(a, b) for a, b in pts))
            parts.append(f'<polyline class="orbit" points="{coords}"/>')
            u, v = fr.px(x, y)
            parts.append(f'<path class="orbit-start" fill="#1f4fbf" d="{_star(u, v)}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _star(u: float, v: float, r: float = 6.0) -> str:
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else r * 0.45
        ang = math.pi / 2 + k * math.pi / 5
        pts.append(f"{_f(u + rad * math.cos(ang))},{_f(v - rad * math.sin(ang))}")
    return "M" + " L".join(pts) + " Z"
