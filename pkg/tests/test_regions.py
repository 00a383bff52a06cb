import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from augmap.models import PRESETS, CompetitionParams, competition, preset
from augmap.nullclines import Sign, coexistence_point
from augmap.regions import (
    Verdict,
    box_lemma_check,
    certify_invariance,
    d1_contains,
    d2_contains,
    decompose,
    jump_demonstration,
    membership,
    oscillation_risk,
)
from augmap.trace import TraceConfig

P, M = Sign.PLUS, Sign.MINUS
EXCLUSION = CompetitionParams(r1=0.5, r2=0.625, K1=0.5, K2=2, alpha1=1, alpha2=1)
BISTABLE = CompetitionParams(r1=0.5, r2=2, K1=2, K2=1.3, alpha1=1, alpha2=3)
COEXIST = CompetitionParams(r1=2, r2=2, K1=1, K2=1, alpha1=1, alpha2=1)
DEGENERATE = CompetitionParams(1, 1, 1, 1, 1, 1)
BUILTIN = list(PRESETS)


def fine(name, n=256):
    m = preset(name)
    return decompose(m, TraceConfig(m.default_bbox(), n, n), strict=False)


def coarse(name, n=256):
    m = preset(name)
    return decompose(m, TraceConfig(m.default_bbox(), n, n), with_roots=False)


def cell_points(dec, region, n, rng):
    """Uniform random points inside random cells of ``region``."""
    nx = dec.cfg.grid_nx
    dx, dy = dec.cfg.cell
    x0, _, y0, _ = dec.cfg.bbox
    cells = rng.choice(region.cells, size=n)
    j, i = np.divmod(cells, nx)
    u, v = rng.random(n), rng.random(n)
    return x0 + (i + u) * dx, y0 + (j + v) * dy


@pytest.fixture(scope="module")
def decompositions():
    return {name: fine(name) for name in BUILTIN}


class TestPartition:
    @pytest.mark.parametrize("name", BUILTIN)
    def test_regions_partition_unbanded_cells(self, decompositions, name):
        dec = decompositions[name]
        seen = np.concatenate([r.cells for r in dec.regions])
        assert len(seen) == len(np.unique(seen))
        assert set(seen.tolist()) == set(np.flatnonzero(dec.labels.ravel() >= 0).tolist())
        assert sum(r.area_fraction for r in dec.regions) <= 1.0 + 1e-12

    @pytest.mark.parametrize("name", BUILTIN)
    def test_signs_constant_under_resampling(self, decompositions, name):
        dec = decompositions[name]
        rng = np.random.default_rng(7)
        m = dec.map
        for r in dec.regions:
            x, y = cell_points(dec, r, 200, rng)
            with np.errstate(all="ignore"):
                assert np.all(np.sign(m.F(x, y) - x) == int(r.direction.dx_sign))
                assert np.all(np.sign(m.G(x, y) - y) == int(r.direction.dy_sign))
                for nc in dec.nullclines:
                    assert np.all(np.sign(nc.side(x, y)) == int(r.sides[nc.label]))
                for op in dec.operators:
                    s = r.op_signs[op.label]
                    if s is not None:
                        assert np.all(np.sign(op(x, y)) == int(s)), (r.id, op.label)

    def test_label_lookup(self, decompositions):
        dec = decompositions["competition_coexistence"]
        r = dec.regions[0]
        assert dec.label_at(*r.representative) == r.id
        assert dec.label_at(-1.0, 0.5) == -2
        assert dec.label_at(np.nan, 0.5) == -2

    def test_deterministic(self):
        a, b = fine("ricker_jumping", 128), fine("ricker_jumping", 128)
        assert np.array_equal(a.labels, b.labels)
        assert [r.op_pattern() for r in a.regions] == [r.op_pattern() for r in b.regions]


class TestSignTables:
    def test_degenerate_two_regions(self, decompositions):
        regs = decompositions["competition_degenerate"].regions
        assert len(regs) == 2
        table = {tuple(r.sides.values()): tuple(r.op_signs.values()) for r in regs}
        assert table == {(M, M): (M, M), (P, P): (P, P)}

    def test_coexistence_left_band(self, decompositions):
        dec = decompositions["competition_coexistence"]
        xs, _ = coexistence_point(COEXIST)
        band = [r for r in dec.with_pattern({"h": M, "k": P}) if r.representative.x < xs]
        assert band and all(r.op_signs == {"h": M, "k": P} for r in band)

    def test_exclusion_band(self, decompositions):
        band = decompositions["competition_exclusion"].with_pattern({"h": P, "k": M})
        assert band and all(r.op_signs == {"h": P, "k": M} for r in band)


class TestInvariance:
    def verdict(self, name, sides, **kw):
        dec = coarse(name)
        (r,) = dec.with_pattern(sides)
        return certify_invariance(dec, r.id, **kw)

    def test_exclusion_band_proven(self):
        assert self.verdict("competition_exclusion", {"h": P, "k": M}).verdict is Verdict.PROVEN_BY_SIGNS

    @pytest.mark.parametrize("sides", [{"h": P, "k": M}, {"h": M, "k": P}])
    def test_coexistence_bands_proven(self, sides):
        assert self.verdict("competition_coexistence", sides).verdict is Verdict.PROVEN_BY_SIGNS

    def test_ricker_jumping_lower_triangle_leaks(self):
        v = self.verdict("ricker_jumping", {"h": M, "k": M})
        assert v.verdict is Verdict.COUNTEREXAMPLE
        m = preset("ricker_jumping")
        x, y = v.point
        for _ in range(v.exit_step):
            x, y = m.F(x, y), m.G(x, y)
        dec = coarse("ricker_jumping")
        (r,) = dec.with_pattern({"h": M, "k": M})
        assert not membership(dec, r)(np.array([x]), np.array([y]))[0]

    def test_ricker_jumping_nothing_proven(self):
        dec = coarse("ricker_jumping")
        for r in dec.regions:
            if not r.touches & {"top", "right"}:
                assert certify_invariance(dec, r.id).verdict is not Verdict.PROVEN_BY_SIGNS

    def test_verdict_dict(self):
        v = self.verdict("ricker_jumping", {"h": M, "k": M})
        d = v.as_dict()
        assert d["verdict"] == "Counterexample" and len(d["point"]) == 2

    def test_empirical_sampling_is_seeded(self):
        dec = coarse("mutualism_coexistence")
        a = [certify_invariance(dec, r.id, n_samples=200, steps=50, seed=3) for r in dec.regions]
        b = [certify_invariance(dec, r.id, n_samples=200, steps=50, seed=3) for r in dec.regions]
        assert a == b


@pytest.mark.parametrize("name", BUILTIN)
def test_proven_regions_survive_random_orbits(name):
    dec = coarse(name)
    rng = np.random.default_rng(11)
    m = dec.map
    for r in dec.regions:
        if certify_invariance(dec, r.id, n_samples=10, steps=1).verdict is not Verdict.PROVEN_BY_SIGNS:
            continue
        inside = membership(dec, r)
        x, y = cell_points(dec, r, 3000, rng)
        keep = inside(x, y)
        x, y = x[keep], y[keep]
        for _ in range(200):
            x, y = m.F(x, y), m.G(x, y)
            assert inside(x, y).all(), (name, r.id)


class TestOscillationRisk:
    def test_ricker_jumping(self):
        assert oscillation_risk(fine("ricker_jumping"))

    def test_degenerate_empty(self):
        assert oscillation_risk(fine("competition_degenerate")) == []

    def test_pairs_are_well_formed(self):
        dec = fine("competition_coexistence")
        for a, b in oscillation_risk(dec):
            assert dec.region(a).below_all() and dec.region(b).above_all()


class TestBoxLemmas:
    @pytest.mark.parametrize("p", [BISTABLE, COEXIST])
    def test_hold(self, p):
        res = box_lemma_check(p, n_samples=20_000)
        assert res and res.n_tested == 20_000 and not res.violations

    def test_requires_interior_equilibrium(self):
        with pytest.raises(ValueError):
            box_lemma_check(EXCLUSION)

    def test_images_avoid_estar(self):
        # no D1 point other than E* itself is a joint root, so no image is E*
        assert box_lemma_check(COEXIST, n_samples=20_000).closest_to_coexistence > 1e-12

    @settings(max_examples=100, suppress_health_check=[HealthCheck.filter_too_much])
    @given(st.floats(0.001, 2 / 3), st.floats(0.001, 2 / 3))
    def test_d1_d2_disjoint(self, x, y):
        assert not (d1_contains(COEXIST, x, y) and d2_contains(COEXIST, x, y))

    def test_d1_excludes_estar(self):
        xs, ys = coexistence_point(COEXIST)
        assert not d1_contains(COEXIST, xs, ys)


class TestJumps:
    def test_ricker_jumping(self):
        rep = jump_demonstration(preset("ricker_jumping"))
        assert rep.found_double and rep.found_exit
        m = preset("ricker_jumping")
        from augmap.nullclines import model_nullclines
        for start, image in rep.double_crossings:
            assert (image.x, image.y) == pytest.approx(tuple(np.array(m(start.x, start.y), dtype=float)))
            for nc in model_nullclines(m):
                assert nc.side(*start) * nc.side(*image) < 0

    def test_coexistence_has_no_double_jump(self):
        assert not jump_demonstration(competition(COEXIST)).found_double
