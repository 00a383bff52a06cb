"""Analysis orchestration and the JSON report format.

``analyze`` runs the whole pipeline for one configuration (equilibria,
nullclines, root curves, region decomposition, invariance verdicts,
case classification) and returns plain JSON-ready data. ``verify`` runs
the checks that apply to the configured model and reports pass/fail per
check.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import competition as comp
from .config import Config, build_map
from .models import Family, PlanarMap, Point
from .next_iterate import closed_form_root_curves, operators_for, root_set_nullcline_intersections
from .nullclines import (
    EquilibriumKind,
    EquilibriumSet,
    UnsupportedFamily,
    equilibria,
    model_nullclines,
    periodic_points,
    stability,
)
from .numerics import quasi_random_box
from .regions import (
    Verdict,
    box_lemma_check,
    certify_invariance,
    decompose,
    jump_demonstration,
    oscillation_risk,
)
from .trace import TraceConfig, trace_zero_set

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "params", "bbox", "equilibria", "nullclines", "root_curves", "regions",
                 "invariance", "invariant_regions", "oscillation_risk", "errors"],
    "properties": {
        "model": {"type": "string"},
        "params": {"type": "object"},
        "bbox": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
        "equilibria": {"type": "array", "items": {
            "type": "object", "required": ["name", "point", "kind", "stability", "eigenvalue_moduli"],
            "properties": {
                "name": {"type": "string"},
                "point": {"$ref": "#/$defs/point"},
                "kind": {"enum": [k.value for k in EquilibriumKind]},
                "stability": {"enum": ["stable", "repeller", "saddle", "nonhyperbolic", "unknown"]},
                "eigenvalue_moduli": {"type": "array", "items": {"type": ["number", "null"]}},
            }}},
        "continuum": {"type": ["array", "null"], "items": {"$ref": "#/$defs/point"}},
        "nullclines": {"type": "array", "items": {"type": "object", "required": ["label", "equation", "form"]}},
        "root_curves": {"type": "array", "items": {
            "type": "object", "required": ["operator", "source"],
            "properties": {"source": {"enum": ["closed_form", "traced"]}}}},
        "regions": {"type": "array", "items": {
            "type": "object", "required": ["id", "cells", "area_fraction", "direction", "op_signs", "sides",
                                           "adjacency", "representative"],
            "properties": {
                "id": {"type": "integer"},
                "direction": {"type": "string", "pattern": "^[-+0]{2}$"},
                "adjacency": {"type": "array", "items": {"type": "integer"}},
                "representative": {"$ref": "#/$defs/point"},
            }}},
        "invariance": {"type": "array", "items": {"$ref": "#/$defs/verdict"}},
        "invariant_regions": {"type": "array", "items": {"$ref": "#/$defs/verdict"}},
        "oscillation_risk": {"type": "array", "items": {
            "type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
        "case": {"enum": ["I", "II", "III", "IV"]},
        "case_kind": {"type": "string"},
        "attractor": {"$ref": "#/$defs/point"},
        "convergence": {"type": "object", "required": ["n_orbits", "counts", "unresolved"]},
        "errors": {"type": "array", "items": {"type": "string"}},
    },
    "$defs": {
        "point": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "verdict": {"type": "object", "required": ["region", "verdict", "sides"], "properties": {
            "region": {"type": "integer"},
            "verdict": {"enum": [v.value for v in Verdict]},
        }},
    },
}

_EQ_NAMES = {EquilibriumKind.ORIGIN: "E0", EquilibriumKind.BOUNDARY_X: "E1",
             EquilibriumKind.BOUNDARY_Y: "E2", EquilibriumKind.INTERIOR: "E*"}


def clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, allow_nan=False) + "\n"


def named_equilibria(eqs: EquilibriumSet) -> list[tuple[str, Point, EquilibriumKind]]:
    out = []
    interior = [p for p, k in eqs.isolated if k is EquilibriumKind.INTERIOR]
    for p, k in eqs.isolated:
        name = _EQ_NAMES[k]
        if k is EquilibriumKind.INTERIOR and len(interior) > 1:
            name = f"E*{interior.index(p) + 1}"
        out.append((name, p, k))
    return out


def trace_config(cfg: Config, m: PlanarMap) -> TraceConfig:
    return TraceConfig(cfg.bbox or m.default_bbox(), cfg.grid, cfg.grid)


def _sign_map(d: dict) -> dict:
    return {k: (None if v is None else v.glyph) for k, v in d.items()}


def analyze(cfg: Config, convergence: bool = False) -> dict:
    m = build_map(cfg)
    tcfg = trace_config(cfg, m)
    errors: list[str] = []
    out: dict = {"model": cfg.model, "params": dict(cfg.params), "bbox": list(tcfg.bbox), "grid": cfg.grid,
                 "seed": cfg.seed}
    if m.family is Family.GENERIC:
        out.update(F=cfg.F, G=cfg.G)

    eqs = equilibria(m)
    rows = []
    for name, p, kind in named_equilibria(eqs):
        ev, tag = stability(m, p)
        rows.append({"name": name, "point": [p.x, p.y], "kind": kind.value, "stability": tag,
                     "eigenvalue_moduli": [abs(z) if math.isfinite(abs(z)) else None for z in ev]})
    out["equilibria"] = rows
    out["continuum"] = None if eqs.continuum is None else [list(eqs.continuum.start), list(eqs.continuum.end)]
    for seed, reason in eqs.failures:
        errors.append(f"equilibrium search from {list(seed)} failed: {reason}")

    try:
        ncs = model_nullclines(m)
    except UnsupportedFamily:
        ncs = []
    out["nullclines"] = [{"label": nc.label, "equation": nc.annihilates.value, "form": nc.orientation.value}
                         for nc in ncs]

    curves = []
    if m.family is Family.COMPETITION:
        for c in closed_form_root_curves(m.params, tcfg.bbox):
            curves.append({"operator": c.nullcline, "source": "closed_form", "branch": c.branch,
                           "variable": c.variable, "in_window": c.in_window})
    elif ncs:
        for op in operators_for(m, ncs):
            tr = trace_zero_set(op, tcfg)
            curves.append({"operator": op.label, "source": "traced", "components": len(tr),
                           "closed": sum(p.closed for p in tr), "masked_cells": tr.masked_cells})
    else:
        for label, f in (("F-X", lambda x, y: m.F(x, y) - x), ("G-Y", lambda x, y: m.G(x, y) - y)):
            tr = trace_zero_set(f, tcfg)
            curves.append({"operator": label, "source": "traced", "components": len(tr),
                           "closed": sum(p.closed for p in tr), "masked_cells": tr.masked_cells})
    out["root_curves"] = curves

    fine = decompose(m, tcfg, ncs or None, strict=False)
    out["regions"] = [{
        "id": r.id, "cells": r.size, "area_fraction": r.area_fraction,
        "direction": r.direction.dx_sign.glyph + r.direction.dy_sign.glyph
        if r.direction.dx_sign is not None and r.direction.dy_sign is not None else "00",
        "op_signs": _sign_map(r.op_signs), "sides": _sign_map(r.sides),
        "adjacency": sorted(r.adjacency), "representative": list(r.representative),
    } for r in fine.regions]
    out["oscillation_risk"] = [list(pair) for pair in oscillation_risk(fine)]

    coarse = decompose(m, tcfg, ncs or None, with_roots=False, strict=False)
    verdicts = []
    for r in coarse.regions:
        v = certify_invariance(coarse, r.id, seed=cfg.seed)
        d = v.as_dict()
        d["sides"] = _sign_map(r.sides)
        d["cells"] = r.size
        d["representative"] = list(r.representative)
        verdicts.append(d)
    out["invariance"] = verdicts
    out["invariant_regions"] = [d for d in verdicts if d["verdict"] != Verdict.COUNTEREXAMPLE.value]

    if m.family is Family.COMPETITION:
        pred = comp.classify(m.params)
        out["case"] = pred.case.value.rstrip("'")
        out["case_kind"] = pred.case.name
        out["efficiencies"] = [pred.efficiencies.c12, pred.efficiencies.c21]
        out["attractors"] = [a.as_dict() for a in pred.predicted_limits]
        if len(pred.predicted_limits) == 1 and pred.predicted_limits[0].point is not None:
            out["attractor"] = list(pred.predicted_limits[0].point)
    if convergence:
        out["convergence"] = convergence_stats(cfg, m, eqs).as_dict()
    out["errors"] = errors
    return clean(out)


def convergence_stats(cfg: Config, m: PlanarMap, eqs: EquilibriumSet | None = None) -> comp.ConvergenceStats:
    o = cfg.orbits
    if m.family is Family.COMPETITION:
        return comp.verify_global_outcome(m.params, o.n, o.steps, o.tol, box=o.box, seed=cfg.seed)
    eqs = eqs or equilibria(m)
    atts = [comp.Attractor(name, point=p) for name, p, _ in named_equilibria(eqs)
            if stability(m, p)[1] == "stable"]
    starts = quasi_random_box(o.n, o.box or m.default_bbox(), seed=cfg.seed)
    who, when, _ = comp.attribute_orbits(m, starts, atts, o.steps, o.tol)
    return comp.ConvergenceStats(
        n_orbits=o.n, counts={a.name: int((who == i).sum()) for i, a in enumerate(atts)},
        unresolved=int((who == -1).sum()), nonfinite=int((who == -2).sum()), max_steps=o.steps, tol=o.tol,
        steps_needed=int(when.max()) if len(when) else 0,
        unresolved_starts=[Point(float(a), float(b)) for a, b in starts[who < 0][:20]])


# ---------------------------------------------------------------- verification

def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _outcome_line(stats: comp.ConvergenceStats, atts: dict[str, Point | None]) -> str:
    parts = []
    for name, count in stats.counts.items():
        if count:
            pt = atts.get(name)
            where = f"=({_fmt(pt.x)}, {_fmt(pt.y)})" if pt is not None else ""
            pct = 100.0 * count / stats.n_orbits
            parts.append(f"{count}/{stats.n_orbits} → {name}{where} ({pct:.4g}%)")
    if stats.unresolved:
        parts.append(f"{stats.unresolved} unresolved")
    if stats.nonfinite:
        parts.append(f"{stats.nonfinite} non-finite")
    return ", ".join(parts) or "no orbits"


def verify(cfg: Config) -> dict:
    """Run every check that applies to the configured model."""
    m = build_map(cfg)
    checks: list[dict] = []

    def add(name: str, ok: bool, detail: str, **data):
        checks.append({"name": name, "ok": bool(ok), "detail": detail, **data})

    if m.family is Family.COMPETITION:
        p = m.params
        pred = comp.classify(p)
        lem = comp.verify_sign_lemmas(p)
        add("sign lemmas", lem.ok, f"{lem.violations} violations",
            lemma=lem.checks[0].name.split()[0] if lem.checks else None, mirrored=lem.mirrored,
            claims=[{"claim": c.name, "operator": c.operator, "region": c.region, "cells": c.n_cells,
                     "violations": len(c.violations)} for c in lem.checks])

        o = cfg.orbits
        stats = comp.verify_global_outcome(p, o.n, o.steps, o.tol, box=o.box, seed=cfg.seed)
        atts = {a.name: a.point for a in pred.limits_for_attribution}
        if pred.case is comp.CaseKind.III_Bistable:
            ok = stats.unresolved == 0 and stats.counts["E1"] > 0 and stats.counts["E2"] > 0
        else:
            main = pred.predicted_limits[0].name
            ok = stats.counts.get(main, 0) == stats.n_orbits
        ok = ok and stats.nonfinite == 0
        add("global outcome", ok, _outcome_line(stats, atts), **stats.as_dict())
        add("boundary orbits", bool(stats.boundary_ok), "axis orbits converge monotonically to K1 / K2")

        eqs = equilibria(m)
        h = model_nullclines(m)[0]
        zeros = root_set_nullcline_intersections(m, h)
        if eqs.continuum is not None:
            ok = len(zeros) > 1000
            detail = f"operator vanishes along the whole line ({len(zeros)} scan points)"
        else:
            on_h = [q for q in eqs.points() if abs(float(h.side(q.x, q.y))) < 1e-12 and 0 <= q.x <= p.K1]
            extra = [z for z in zeros if min(math.hypot(z.x - q.x, z.y - q.y) for q in on_h) > 1e-8]
            missing = [q for q in on_h if min((math.hypot(z.x - q.x, z.y - q.y) for z in zeros), default=1.0) > 1e-8]
            ok = not extra and not missing
            detail = f"{len(zeros)} zeros on h, {len(on_h)} equilibria on h, {len(extra)} extra, {len(missing)} missing"
        add("zeros on nullcline", ok, detail, zeros=[list(z) for z in zeros[:50]])

        if pred.case in (comp.CaseKind.III_Bistable, comp.CaseKind.IV_Coexistence):
            box = box_lemma_check(p, seed=cfg.seed)
            add("box lemmas", box.holds, f"{len(box.violations)} images of {box.n_tested} lower-box points in the upper box")
        if pred.case is comp.CaseKind.I_DegenerateLine:
            demo = comp.case1_stability_demo(p, seed=cfg.seed)
            worst = max(min(abs(abs(z) - 1.0) for z in ev) for ev in demo.eigenvalues)
            ok = worst < 1e-9 and demo.exits == 0 and demo.max_limit_distance < o.tol
            add("line of equilibria", ok,
                f"unit eigenvalue error {worst:.1e}; {demo.exits}/{demo.starts} rectangle exits; "
                f"limits within {demo.max_limit_distance:.1e} of the segment", **demo.as_dict())
        summary = f"sign lemmas: {lem.violations} violations; global outcome: {_outcome_line(stats, atts)}"
    else:
        eqs = equilibria(m)
        stats = convergence_stats(cfg, m, eqs)
        pts = {name: q for name, q, _ in named_equilibria(eqs)}
        ok = stats.unresolved == 0 and stats.nonfinite == 0 and sum(stats.counts.values()) == stats.n_orbits
        add("global outcome", ok, _outcome_line(stats, pts), **stats.as_dict())
        summary = f"global outcome: {_outcome_line(stats, pts)}"
        if m.family is Family.PREDPREY:
            q = m.params
            if q.d < q.gamma * q.K < 1 + 2 * q.d:
                found = []
                for period in (2, 3):
                    res = periodic_points(m, period, seed=cfg.seed)
                    found += [[period, pt.x, pt.y] for pt in res.prime]
                add("no period-2/3 orbits", not found, f"{len(found)} prime period-2/3 points found", points=found)
                summary += f"; period-2/3 points: {len(found)}"
        if m.family is Family.RICKER:
            jd = jump_demonstration(m)
            add("one-step jumps", True,
                f"{len(jd.double_crossings)} starts jump over both nullclines; "
                f"{len(jd.region_exits)} leave a region between them",
                double_crossings=[[list(a), list(b)] for a, b in jd.double_crossings],
                region_exits=[[r, list(a), list(b)] for r, a, b in jd.region_exits])
    return clean({"model": cfg.model, "params": dict(cfg.params), "seed": cfg.seed,
                  "ok": all(c["ok"] for c in checks), "summary": summary, "checks": checks})
