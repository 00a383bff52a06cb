import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from augmap.config import ConfigError, build_map, parse_config
from augmap.expr import ExprError, compile_expr
from augmap.models import Family


class TestExpr:
    @pytest.mark.parametrize(
        "text, value",
        [
            ("1 + 2 * 3", 7.0),
            ("(1 + 2) * 3", 9.0),
            ("-2^2", -4.0),
            ("2^-1", 0.5),
            ("2^3^2", 512.0),
            ("2**3", 8.0),
            ("exp(0)", 1.0),
            ("1e-3 * 1000", 1.0),
            (".5 + 1.", 1.5),
            ("8 / 4 / 2", 1.0),
        ],
    )
    def test_constants(self, text, value):
        assert compile_expr(text)(0.0, 0.0) == pytest.approx(value)

    def test_variables_and_constants(self):
        f = compile_expr("X * exp(r - X - a * Y)", {"r": 0.9, "a": 0.4})
        x, y = np.array([0.5, 1.0]), np.array([0.2, 0.3])
        assert np.allclose(f(x, y), x * np.exp(0.9 - x - 0.4 * y))

    def test_constant_broadcasts(self):
        assert compile_expr("3")(np.zeros((2, 3)), 0.0).shape == (2, 3)

    @pytest.mark.parametrize(
        "text, col",
        [("1 +", 4), ("X $ Y", 3), ("foo + 1", 1), ("(X", 3), ("exp X", 5), ("1 2", 3)],
    )
    def test_errors_carry_column(self, text, col):
        with pytest.raises(ExprError) as e:
            compile_expr(text)
        assert e.value.pos + 1 == col

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_matches_python(self, x, y):
        f = compile_expr("(X - Y) * (X + Y) / (1 + X^2 + Y^2)")
        assert f(x, y) == pytest.approx((x - y) * (x + y) / (1 + x * x + y * y), rel=1e-12, abs=1e-12)


COMP = {"model": "competition", "params": {"r1": 2, "r2": 2, "K1": 1, "K2": 1, "alpha1": 1, "alpha2": 1}}


def dump(d):
    return json.dumps(d, indent=2)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(dump(COMP), env={})
        assert cfg.family is Family.COMPETITION
        assert (cfg.grid, cfg.seed, cfg.orbits.n, cfg.orbits.steps, cfg.orbits.tol) == (256, 0, 1000, 10_000, 1e-6)

    def test_seed_env_override(self):
        assert parse_config(dump({**COMP, "seed": 3}), env={"AUGMAP_SEED": "9"}).seed == 9

    def test_bad_seed_env(self):
        with pytest.raises(ConfigError):
            parse_config(dump(COMP), env={"AUGMAP_SEED": "x"})

    def test_invalid_json_line(self):
        with pytest.raises(ConfigError) as e:
            parse_config('{\n  "model": "competition",\n  "params": {,}\n}', env={})
        assert e.value.line == 3

    def test_unknown_key_line(self):
        with pytest.raises(ConfigError) as e:
            parse_config(dump({**COMP, "colour": "red"}), env={})
        assert "colour" in str(e.value) and e.value.line is not None

    def test_negative_parameter(self):
        bad = {**COMP, "params": {**COMP["params"], "alpha1": -1}}
        with pytest.raises(ConfigError, match="alpha1"):
            parse_config(dump(bad), env={})

    @pytest.mark.parametrize(
        "patch",
        [{"bbox": [0, 1, 0]}, {"bbox": [1, 0, 0, 1]}, {"grid": 4}, {"grid": True}, {"seed": -1},
         {"orbits": {"n": 0}}, {"orbits": {"speed": 1}}, {"model": "lotka"}, {"F": "X"}],
    )
    def test_rejections(self, patch):
        with pytest.raises(ConfigError):
            parse_config(dump({**COMP, **patch}), env={})

    def test_generic(self):
        text = dump({"model": "generic", "F": "X * exp(r * (1 - X))", "G": "0.5 * Y",
                     "params": {"r": 1.5}, "bbox": [0, 3, 0, 1]})
        cfg = parse_config(text, env={})
        m = build_map(cfg)
        assert m.F(1.0, 0.0) == pytest.approx(1.0)
        assert m.default_bbox() == (0.0, 3.0, 0.0, 1.0)

    def test_generic_needs_bbox_and_expressions(self):
        with pytest.raises(ConfigError):
            parse_config(dump({"model": "generic", "F": "X", "G": "Y"}), env={})
        with pytest.raises(ConfigError):
            parse_config(dump({"model": "generic", "F": "X", "bbox": [0, 1, 0, 1]}), env={})

    def test_generic_bad_expression(self):
        with pytest.raises(ConfigError, match="column"):
            parse_config(dump({"model": "generic", "F": "X +", "G": "Y", "bbox": [0, 1, 0, 1]}), env={})
