import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augmap.models import (
    PRESETS,
    CompetitionParams,
    Family,
    NonFiniteError,
    build,
    generic,
    iterate_batch,
    jacobian_at,
    orbit,
    preset,
    step,
)

BUILTIN = [name for name in PRESETS]
coord = st.floats(0.0, 5.0, allow_nan=False)


class TestParams:
    @pytest.mark.parametrize("bad", [0, -1.0, math.inf, math.nan, True, "2"])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(ValueError):
            CompetitionParams(r1=bad, r2=1, K1=1, K2=1, alpha1=1, alpha2=1)

    def test_build_reports_missing_and_unknown(self):
        with pytest.raises(ValueError, match="missing.*alpha2.*unknown.*beta"):
            build("competition", dict(r1=1, r2=1, K1=1, K2=1, alpha1=1, beta=2))

    def test_build_generic_refused(self):
        with pytest.raises(ValueError):
            build(Family.GENERIC, {})

    def test_as_dict_roundtrip(self):
        p = CompetitionParams(1, 2, 3, 4, 5, 6)
        assert CompetitionParams(**p.as_dict()) == p


@pytest.mark.parametrize("name", BUILTIN)
class TestPresets:
    def test_axes_forward_invariant(self, name):
        m = preset(name)
        xs = np.linspace(0, 5, 41)
        assert np.all(m.G(xs, np.zeros_like(xs)) == 0)
        assert np.all(m.F(np.zeros_like(xs), xs) == 0)

    def test_origin_fixed(self, name):
        assert step(preset(name), (0.0, 0.0)) == (0.0, 0.0)

    def test_default_bbox_first_quadrant(self, name):
        x0, x1, y0, y1 = preset(name).default_bbox()
        assert x0 == 0 and y0 == 0 and x1 > 0 and y1 > 0

    @settings(max_examples=40, deadline=None)
    @given(x=coord, y=coord)
    def test_jacobian_matches_differences(self, name, x, y):
        m = preset(name)
        a = jacobian_at(m, (x, y))
        b = jacobian_at(m, (x, y), analytic=False)
        assert np.allclose(a, b, rtol=1e-5, atol=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(x=coord, y=coord)
    def test_positive_quadrant_maps_to_itself(self, name, x, y):
        fx, gy = step(preset(name), (x, y))
        assert fx >= 0 and gy >= 0


def test_competition_values():
    m = preset("competition_coexistence")
    # (1+2)*1/(1+2+1) = 3/4
    assert m.F(1.0, 1.0) == pytest.approx(0.75)
    assert m.G(0.5, 0.0) == 0.0


class TestOrbits:
    def test_length_and_start(self):
        ob = orbit(preset("ricker_jumping"), (0.5, 0.5), 10)
        assert ob.points.shape == (11, 2)
        assert tuple(ob.points[0]) == (0.5, 0.5)
        assert ob.complete

    def test_negative_n(self):
        with pytest.raises(ValueError):
            orbit(preset("ricker_jumping"), (0.5, 0.5), -1)

    def test_non_finite_is_reported(self):
        m = generic(lambda x, y: x * x, lambda x, y: y, (0, 1, 0, 1))
        with pytest.raises(NonFiniteError):
            with np.errstate(over="ignore"):
                for _ in range(20):
                    step(m, (1e200, 1.0))
        ob = orbit(m, (1e200, 1.0), 5)
        assert ob.failed_at == 0 and not ob.complete

    def test_batch_isolates_divergence(self):
        m = generic(lambda x, y: x * x, lambda x, y: y, (0, 1, 0, 1))
        with np.errstate(over="ignore"):
            x, y, ok = iterate_batch(m, np.array([0.5, 1e200]), np.array([1.0, 1.0]), 3)
        assert ok.tolist() == [True, False]
        assert x[0] == pytest.approx(0.5 ** 8)

    def test_batch_matches_scalar(self):
        m = preset("mutualism_coexistence")
        x, y, ok = iterate_batch(m, np.array([1.0, 2.0]), np.array([3.0, 0.5]), 7)
        for i, p0 in enumerate([(1.0, 3.0), (2.0, 0.5)]):
            assert np.allclose(orbit(m, p0, 7).points[-1], [x[i], y[i]], rtol=1e-14)


class TestGeneric:
    def test_scalar_only_function_is_vectorised(self):
        m = generic(lambda x, y: math.exp(-x) * y, lambda x, y: x, (0, 1, 0, 1))
        out = m.F(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert np.allclose(out, [1.0, math.exp(-1)])

    def test_zero_area_box(self):
        with pytest.raises(ValueError):
            generic(lambda x, y: x, lambda x, y: y, (0, 0, 0, 1))
