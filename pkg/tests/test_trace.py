import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augmap.models import CompetitionParams, preset
from augmap.next_iterate import closed_form_root_curves, operators_for
from augmap.trace import (
    BOTTOM,
    LEFT,
    RIGHT,
    TOP,
    TraceConfig,
    densify,
    hausdorff,
    saddle_disambiguation,
    trace_zero_set,
)

circle = lambda x, y: x**2 + y**2 - 1.0


def turns(values: np.ndarray) -> int:
    d = np.sign(np.diff(values))
    d = d[d != 0]
    return int(np.sum(d[1:] * d[:-1] < 0))


class TestConfig:
    def test_rejects_empty_box(self):
        with pytest.raises(ValueError):
            TraceConfig((0, 0, 0, 1))

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            TraceConfig((0, 1, 0, 1), 8, 8)

    def test_cell(self):
        cfg = TraceConfig((0, 2, 0, 1), 100, 50)
        assert cfg.cell == (0.02, 0.02)
        assert cfg.cell_diagonal == pytest.approx(0.02 * math.sqrt(2))


class TestCircle:
    def test_quarter_circle(self):
        res = trace_zero_set(circle, TraceConfig((0, 2, 0, 2), 512, 512))
        assert len(res) == 1
        pts = res.polylines[0].points
        assert np.max(np.abs(circle(pts[:, 0], pts[:, 1]))) < 1e-9
        assert res.polylines[0].arc_length() == pytest.approx(math.pi / 2, rel=0.01)

    def test_full_circle_closed(self):
        res = trace_zero_set(circle, TraceConfig((-2, 2, -2, 2), 128, 128))
        assert len(res) == 1 and res.polylines[0].closed
        assert res.polylines[0].arc_length() == pytest.approx(2 * math.pi, rel=0.01)

    def test_no_zero(self):
        assert trace_zero_set(lambda x, y: x + y + 10, TraceConfig((0, 1, 0, 1), 32, 32)).empty

    def test_deterministic(self):
        cfg = TraceConfig((-1.3, 1.7, -1.1, 1.9), 97, 83)
        a = trace_zero_set(circle, cfg).vertices()
        b = trace_zero_set(circle, cfg).vertices()
        assert np.array_equal(a, b)

    def test_non_finite_cells_masked(self):
        f = lambda x, y: np.where(x < 0.5, np.nan, y - 0.5)
        res = trace_zero_set(f, TraceConfig((0, 1, 0, 1), 64, 64))
        assert res.masked_cells > 0
        assert np.all(res.vertices()[:, 0] >= 0.5 - 1 / 64)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-1, 1).filter(lambda v: abs(v) > 0.05),
    st.floats(-1, 1).filter(lambda v: abs(v) > 0.05),
    st.floats(-0.5, 0.5),
)
def test_lines_are_traced_exactly(a, b, c):
    f = lambda x, y: a * x + b * y + c
    res = trace_zero_set(f, TraceConfig((-1, 1, -1, 1), 64, 64))
    v = res.vertices()
    if len(v):
        assert np.max(np.abs(f(v[:, 0], v[:, 1]))) < 1e-9
        assert len(res) == 1


class TestSaddle:
    corners = (1.0, -1.0, 1.0, -1.0)  # positive at (x0,y0) and (x1,y1)

    def test_positive_center_cuts_negative_corners(self):
        got = saddle_disambiguation(self.corners, 0.5)
        assert set(got) == {(BOTTOM, RIGHT), (TOP, LEFT)}

    def test_negative_center_cuts_positive_corners(self):
        got = saddle_disambiguation(self.corners, -0.5)
        assert set(got) == {(BOTTOM, LEFT), (RIGHT, TOP)}

    def test_zero_center_subdivides(self):
        calls = []

        def sub(u, v):
            calls.append((u, v))
            return -1.0

        got = saddle_disambiguation(self.corners, 0.0, subsample=sub)
        assert len(calls) == 4
        assert set(got) == {(BOTTOM, LEFT), (RIGHT, TOP)}

    def test_zero_center_without_sampler_counts_positive(self):
        assert saddle_disambiguation(self.corners, 0.0) == saddle_disambiguation(self.corners, 1.0)

    def test_hyperbola_branches_stay_apart(self):
        # x*y - eps has two branches; the centre rule must not join them
        f = lambda x, y: x * y - 0.01
        res = trace_zero_set(f, TraceConfig((-1, 1, -1, 1), 64, 64))
        assert len(res) == 2
        for pl in res:
            assert np.all(np.sign(pl.points[:, 0]) == np.sign(pl.points[0, 0]))


class TestHelpers:
    def test_hausdorff_symmetric(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.5]])
        assert hausdorff(a, b) == hausdorff(b, a) == pytest.approx(math.hypot(1, 0.5))

    def test_densify_spacing(self):
        pts = densify(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.1)
        assert np.max(np.diff(pts[:, 0])) <= 0.1 + 1e-12
        assert pts[0].tolist() == [0.0, 0.0] and pts[-1].tolist() == [1.0, 0.0]


class TestModelRootCurves:
    def test_competition_matches_closed_form(self):
        p = CompetitionParams(r1=2, r2=2, K1=1, K2=1, alpha1=1, alpha2=1)
        m = preset("competition_coexistence")
        cfg = TraceConfig(m.default_bbox(), 256, 256)
        for op in operators_for(m):
            traced = trace_zero_set(op, cfg).vertices()
            ref = np.vstack([densify(piece, cfg.cell_diagonal / 4)
                             for c in closed_form_root_curves(p, cfg.bbox) if c.nullcline == op.label
                             for piece in c.pieces(4000)])
            assert hausdorff(traced, ref) < cfg.cell_diagonal

    @pytest.mark.parametrize("name", ["ricker_coexistence", "ricker_jumping"])
    def test_ricker_root_curves_are_not_graphs(self, name):
        m = preset(name)
        for op in operators_for(m):
            res = trace_zero_set(op, TraceConfig(m.default_bbox(), 512, 512))
            assert any(turns(pl.points[:, 0]) > 0 for pl in res), op.label
            assert any(turns(pl.points[:, 1]) > 0 for pl in res), op.label

    @pytest.mark.parametrize("name", ["ricker_coexistence", "ricker_jumping"])
    def test_ricker_root_curves_close_beyond_the_axes(self, name):
        m = preset(name)
        for op in operators_for(m):
            res = trace_zero_set(op, TraceConfig((-1, 3, -1, 3), 512, 512))
            assert any(pl.closed for pl in res), op.label

    def test_mutualism_split_roots(self):
        m = preset("mutualism_split_roots")
        for op in operators_for(m):
            assert len(trace_zero_set(op, TraceConfig(m.default_bbox(), 512, 512))) >= 2
