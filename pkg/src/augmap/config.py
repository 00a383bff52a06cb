"""JSON run configuration for the command-line tool.

Example::

    {"model": "competition",
     "params": {"r1": 2, "r2": 2, "K1": 1, "K2": 1, "alpha1": 1, "alpha2": 1},
     "bbox": [0, 2.4, 0, 2.4], "grid": 256, "seed": 0,
     "orbits": {"n": 1000, "steps": 10000, "tol": 1e-6}}

Generic maps give the two components as expressions in ``X``, ``Y`` and
the names in ``params``: ``{"model": "generic", "F": "...", "G": "...",
"params": {...}, "bbox": [...]}``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ExprError, compile_expr
from .models import Family, PlanarMap, build, generic

SEED_ENV = "AUGMAP_SEED"
KNOWN_KEYS = {"model", "params", "bbox", "grid", "seed", "orbits", "F", "G", "name"}
ORBIT_KEYS = {"n", "steps", "tol", "box"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class OrbitSettings:
    n: int = 1000
    steps: int = 10_000
    tol: float = 1e-6
    box: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class Config:
    model: str
    params: dict
    bbox: tuple[float, float, float, float] | None = None
    grid: int = 256
    seed: int = 0
    orbits: OrbitSettings = field(default_factory=OrbitSettings)
    F: str | None = None
    G: str | None = None
    name: str | None = None

    @property
    def family(self) -> Family:
        return Family(self.model)


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _box(value, what: str, line) -> tuple[float, float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError(f"{what} must be [x0, x1, y0, y1]", line)
    try:
        box = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} entries must be numbers", line) from None
    if not all(math.isfinite(v) for v in box) or not (box[1] > box[0] and box[3] > box[2]):
        raise ConfigError(f"{what} must be finite with positive area", line)
    return box  # type: ignore[return-value]


def parse_config(text: str, env: dict | None = None) -> Config:
    env = os.environ if env is None else env
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", e.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", 1)
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", _line_of(text, key))
    if "model" not in raw:
        raise ConfigError("missing key 'model'", 1)
    model = raw["model"]
    try:
        family = Family(model)
    except ValueError:
        names = ", ".join(f.value for f in Family)
        raise ConfigError(f"unknown model {model!r} (expected one of {names})", _line_of(text, "model")) from None
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object", _line_of(text, "params"))

    bbox = _box(raw["bbox"], "bbox", _line_of(text, "bbox")) if "bbox" in raw else None
    grid = raw.get("grid", 256)
    if not isinstance(grid, int) or isinstance(grid, bool) or grid < 16:
        raise ConfigError("grid must be an integer >= 16", _line_of(text, "grid"))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer", _line_of(text, "seed"))
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None

    orb = raw.get("orbits", {})
    if not isinstance(orb, dict) or set(orb) - ORBIT_KEYS:
        raise ConfigError(f"orbits must be an object with keys among {sorted(ORBIT_KEYS)}", _line_of(text, "orbits"))
    try:
        orbits = OrbitSettings(
            n=int(orb.get("n", 1000)), steps=int(orb.get("steps", 10_000)), tol=float(orb.get("tol", 1e-6)),
            box=_box(orb["box"], "orbits.box", _line_of(text, "box")) if "box" in orb else None,
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad orbits entry: {e}", _line_of(text, "orbits")) from None
    if orbits.n < 1 or orbits.steps < 1 or not orbits.tol > 0:
        raise ConfigError("orbits.n and orbits.steps must be positive, orbits.tol > 0", _line_of(text, "orbits"))

    cfg = Config(model=model, params=params, bbox=bbox, grid=grid, seed=seed, orbits=orbits,
                 F=raw.get("F"), G=raw.get("G"), name=raw.get("name"))
    if family is Family.GENERIC:
        if not isinstance(cfg.F, str) or not isinstance(cfg.G, str):
            raise ConfigError("generic models need string expressions 'F' and 'G'", _line_of(text, "model"))
        if bbox is None:
            raise ConfigError("generic models need a bbox", _line_of(text, "model"))
    elif cfg.F is not None or cfg.G is not None:
        raise ConfigError("'F'/'G' are only allowed for generic models", _line_of(text, "F") or _line_of(text, "G"))
    # build once so parameter errors surface at load time
    build_map(cfg, text)
    return cfg


def load_config(path: str | Path, env: dict | None = None) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return parse_config(text, env)


def build_map(cfg: Config, text: str | None = None) -> PlanarMap:
    family = cfg.family
    line = _line_of(text, "params") if text else None
    if family is Family.GENERIC:
        consts = {}
        for k, v in cfg.params.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"parameter {k!r} must be a number", line)
            consts[k] = float(v)
        try:
            F = compile_expr(cfg.F, consts)
            G = compile_expr(cfg.G, consts)
        except ExprError as e:
            raise ConfigError(str(e), _line_of(text, "F") if text else None) from None
        return generic(F, G, cfg.bbox, params=consts, name=cfg.name or "generic")
    try:
        return build(family, dict(cfg.params), cfg.bbox)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), line) from None
