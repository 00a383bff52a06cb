import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from augmap.models import CompetitionParams, competition, preset, step
from augmap.nullclines import coexistence_point, competition_nullclines, equilibria, model_nullclines
from augmap.next_iterate import (
    NextIterateOperator,
    closed_form_root_curves,
    competition_quadratics,
    eval_operator,
    joint_root_preimage_check,
    operators_for,
    quadratic_branches,
    root_set_nullcline_intersections,
)
from augmap.numerics import bisect, quasi_random_box

EXCLUSION = CompetitionParams(r1=0.5, r2=0.625, K1=0.5, K2=2, alpha1=1, alpha2=1)
BISTABLE = CompetitionParams(r1=0.5, r2=2, K1=2, K2=1.3, alpha1=1, alpha2=3)
COEXIST = CompetitionParams(r1=2, r2=2, K1=1, K2=1, alpha1=1, alpha2=1)
DEGENERATE = CompetitionParams(1, 1, 1, 1, 1, 1)
ALL = [EXCLUSION, BISTABLE, COEXIST, DEGENERATE]

pos = st.floats(0.1, 4.0, allow_nan=False)
params_st = st.builds(CompetitionParams, pos, pos, pos, pos, pos, pos)


def symbolic_numerators():
    """Numerators of L_h and L_k cleared of denominators, derived symbolically."""
    X, Y, r1, r2, K1, K2, a1, a2 = sp.symbols("X Y r1 r2 K1 K2 a1 a2", positive=True)
    F = (1 + r1) * X / (1 + r1 * X / K1 + a1 * Y)
    G = (1 + r2) * Y / (1 + r2 * Y / K2 + a2 * X)
    h = lambda x: r1 / a1 - r1 / (a1 * K1) * x
    k = lambda x: K2 - K2 * a2 / r2 * x
    d1 = K1 + r1 * X + a1 * K1 * Y
    d2 = K2 + a2 * K2 * X + r2 * Y
    Nh = sp.simplify((G - h(F)) * a1 * d1 * d2)
    Nk = sp.simplify((G - k(F)) * r2 * d1 * d2)
    syms = (X, Y, r1, r2, K1, K2, a1, a2)
    return sp.lambdify(syms, sp.expand(Nh)), sp.lambdify(syms, sp.expand(Nk))


SYM_NH, SYM_NK = symbolic_numerators()


class TestOperators:
    @pytest.mark.parametrize("p", ALL)
    def test_vanish_at_equilibria_on_their_nullcline(self, p):
        m = competition(p)
        for q, _ in equilibria(m).isolated:
            for op in operators_for(m):
                if abs(op.nullcline.side(q.x, q.y)) < 1e-12:
                    assert abs(eval_operator(op, q)) < 1e-12

    @pytest.mark.parametrize("p", [BISTABLE, COEXIST])
    def test_vanish_at_interior(self, p):
        m = competition(p)
        for op in operators_for(m):
            assert abs(eval_operator(op, coexistence_point(p))) < 1e-12

    @settings(max_examples=50)
    @given(params_st, st.floats(0.01, 0.99))
    def test_x_axis_below_h(self, p, s):
        m = competition(p)
        op = operators_for(m)[0]
        assert eval_operator(op, (s * p.K1, 0.0)) < 0

    def test_coexistence_below_both_signs(self):
        m = competition(COEXIST)
        lh, lk = (eval_operator(op, (0.2, 0.2)) for op in operators_for(m))
        # brute force: the image of (0.2, 0.2) is compared against both lines directly
        fx, gy = step(m, (0.2, 0.2))
        h, k = competition_nullclines(COEXIST)
        assert np.sign(lh) == np.sign(gy - h(fx))
        assert np.sign(lk) == np.sign(gy - k(fx))

    def test_vectorised_matches_scalar(self):
        m = preset("ricker_jumping")
        op = operators_for(m)[1]
        pts = quasi_random_box(50, m.default_bbox())
        vec = op(pts[:, 0], pts[:, 1])
        assert np.allclose(vec, [eval_operator(op, q) for q in pts], rtol=0, atol=1e-14)

    def test_vertical_nullcline_operator(self):
        m = preset("predprey_coexistence")
        op = operators_for(m)[1]
        # positive exactly when the image lies right of X = d/gamma
        fx, _ = step(m, (2.0, 0.1))
        assert np.sign(eval_operator(op, (2.0, 0.1))) == np.sign(fx - 1 / 1.5)


class TestQuadratics:
    @settings(max_examples=60, deadline=None)
    @given(params_st, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_numerators_match_symbolic(self, p, x, y):
        q = competition_quadratics(p)
        args = (x, y, p.r1, p.r2, p.K1, p.K2, p.alpha1, p.alpha2)
        nh, nk = SYM_NH(*args), SYM_NK(*args)
        scale_h = 1 + abs(q.a0(x)) + abs(q.a1(x) * y) + abs(q.a2 * y * y)
        scale_k = 1 + abs(q.b0(x)) + abs(q.b1(x) * y) + abs(q.b2 * y * y)
        assert q.N_h(x, y) == pytest.approx(nh, abs=1e-11 * scale_h)
        assert q.N_h(x, y, "A") == pytest.approx(nh, abs=1e-11 * scale_h)
        assert q.N_k(x, y) == pytest.approx(nk, abs=1e-11 * scale_k)
        assert q.N_k(x, y, "B") == pytest.approx(nk, abs=1e-11 * scale_k)

    @settings(max_examples=60, deadline=None)
    @given(params_st, st.floats(0.01, 3.0), st.floats(0.01, 3.0))
    def test_denominator_form_equals_operator(self, p, x, y):
        q = competition_quadratics(p)
        lh, lk = operators_for(competition(p))
        assert q.L_h(x, y) == pytest.approx(float(lh(x, y)), rel=1e-9, abs=1e-13)
        assert q.L_k(x, y) == pytest.approx(float(lk(x, y)), rel=1e-9, abs=1e-13)

    @settings(max_examples=50)
    @given(params_st)
    def test_a0_vanishes_at_K1(self, p):
        assert competition_quadratics(p).a0(p.K1) == 0.0

    def test_degenerate_leading_coefficient(self):
        q = competition_quadratics(DEGENERATE)
        p = DEGENERATE
        assert q.a2 == pytest.approx(p.alpha1 * p.r1 * p.r2 / p.alpha1)
        x = np.linspace(0, 1, 11)
        rh1 = closed_form_root_curves(p)[0]
        rh2 = closed_form_root_curves(p)[1]
        assert np.allclose(rh1(x), 1 - x, atol=1e-12)
        assert np.allclose(rh2(x), -(x + 1), atol=1e-12)

    @pytest.mark.parametrize("c0, c1, c2, roots", [(2, -3, 1, {1, 2}), (-1, 0, 1, {-1, 1}), (1e-20, 1, 1, {-1e-20, -1})])
    def test_branch_roots(self, c0, c1, c2, roots):
        a, b = quadratic_branches(np.array([c0]), np.array([c1]), c2)
        got = sorted([a[0], b[0]])
        for g, r in zip(got, sorted(roots)):
            assert g == pytest.approx(r, rel=1e-12, abs=1e-30)

    def test_negative_discriminant_is_nan(self):
        a, b = quadratic_branches(np.array([1.0]), np.array([0.0]), 1.0)
        assert np.isnan(a[0]) and np.isnan(b[0])


class TestRootCurves:
    def test_exclusion_rh1_below_h(self):
        h, _ = competition_nullclines(EXCLUSION)
        rh1 = closed_form_root_curves(EXCLUSION)[0]
        x = np.linspace(0, EXCLUSION.K1, 202)[1:-1]
        assert np.all(rh1(x) < h(x))

    @pytest.mark.parametrize("p", [BISTABLE, COEXIST])
    def test_operator_vanishes_on_branches(self, p):
        m = competition(p)
        ops = {op.label: op for op in operators_for(m)}
        for c in closed_form_root_curves(p):
            if not c.in_window:
                continue
            pts = c.sample(400)
            if len(pts) == 0:
                continue
            vals = ops[c.nullcline](pts[:, 0], pts[:, 1])
            assert np.max(np.abs(vals)) < 1e-8, c.branch

    def test_eight_branches(self):
        cs = closed_form_root_curves(COEXIST)
        assert [c.branch for c in cs] == ["rh1", "rh2", "Rh1", "Rh2", "rk1", "rk2", "Rk1", "Rk2"]


class TestNullclineIntersections:
    def test_coexistence_zeros_are_equilibria(self):
        m = competition(COEXIST)
        h = model_nullclines(m)[0]
        got = root_set_nullcline_intersections(m, h)
        assert len(got) == 2
        assert got[0] == pytest.approx((2 / 3, 2 / 3), abs=1e-8)
        assert got[1] == pytest.approx((1.0, 0.0), abs=1e-8)

    def test_exclusion_only_E1(self):
        m = competition(EXCLUSION)
        got = root_set_nullcline_intersections(m, model_nullclines(m)[0])
        assert len(got) == 1 and got[0] == pytest.approx((0.5, 0.0), abs=1e-8)

    @pytest.mark.parametrize("name", ["competition_bistable", "ricker_coexistence", "mutualism_coexistence"])
    def test_every_zero_is_fixed(self, name):
        m = preset(name)
        for nc in model_nullclines(m):
            for q in root_set_nullcline_intersections(m, nc):
                r = step(m, q)
                assert max(abs(r.x - q.x), abs(r.y - q.y)) < 1e-8

    def test_bisection_on_h_gives_coexistence_abscissa(self):
        m = competition(COEXIST)
        h = model_nullclines(m)[0]
        op = NextIterateOperator(m, h)
        g = lambda s: float(op(s, h(s)))
        assert bisect(g, 0.5, 0.9, tol=1e-13) == pytest.approx(2 / 3, abs=1e-12)


class TestJointRoots:
    def test_estar(self):
        e = coexistence_point(COEXIST)
        assert joint_root_preimage_check(COEXIST, e)
        assert step(competition(COEXIST), e) == pytest.approx(e, abs=1e-15)

    def test_lower_box_has_no_other_joint_root(self):
        xs, ys = coexistence_point(COEXIST)
        pts = quasi_random_box(10_000, (0, xs, 0, ys))
        pts = pts[~((pts[:, 0] == xs) & (pts[:, 1] == ys))]
        assert not any(joint_root_preimage_check(COEXIST, q) for q in pts)
