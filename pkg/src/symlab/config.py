"""Run configuration: one JSON document, validated into dataclasses.

Every error carries the line of the offending key so the CLI can point at it.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields

COMMANDS = ("solve", "identities", "report", "sweep", "analytic")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class CurveSpec:
    a0: float = 1.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class FamilySpec:
    mode: int = 2
    a0: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Tolerances:
    identity: float = 5e-3
    slack: float = 0.02
    abs_tol: float = 1e-6
    residual_floor: float = 1e-4
    min_r2: float = 0.98
    min_slope: float = 0.9
    ratio_spread: float = 2.0
    noise_floor: float = 1e-6


@dataclass(frozen=True)
class AnalyticSpec:
    dimensions: tuple[int, ...] = (2, 3, 4, 5)
    capacity_grid: tuple[int, ...] = (3, 4, 5)
    exponents: tuple[float, ...] = (1.5, 2.0, 2.5)
    cone_m: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    hardy_n: tuple[int, ...] = (3, 4, 5, 6, 7, 8, 9, 10, 11)
    n_points: int = 1000
    search: int = 10000


@dataclass(frozen=True)
class RunConfig:
    command: str | None = None
    curve: CurveSpec = field(default_factory=CurveSpec)
    h_max: float = 0.05
    degree: int = 2
    family: FamilySpec = field(default_factory=FamilySpec)
    epsilons: tuple[float, ...] = (0.08, 0.06, 0.04, 0.02)
    c_mesh: float = 2.0
    h_cap: float = 0.05
    seed: int = 0
    p: float = 2.0
    plots: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)
    analytic: AnalyticSpec = field(default_factory=AnalyticSpec)

    def canonical(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


_POSITIVE = {"h_max", "c_mesh", "h_cap", "p", "a0", "identity", "slack", "abs_tol",
             "residual_floor", "min_r2", "min_slope", "ratio_spread", "noise_floor",
             "n_points", "search"}


class KeyLocator:
    """Approximate line lookup for a key path in the raw JSON text."""

    def __init__(self, text: str):
        self.text = text

    def line(self, path: tuple[str, ...]) -> int | None:
        pos = 0
        for key in path:
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(self.text, pos)
            if m is None:
                return None
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1


def _build(cls, data, path, loc):
    if not isinstance(data, dict):
        raise ConfigError(f"'{'.'.join(path) or 'config'}' must be an object", loc.line(path))
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, val in data.items():
        kpath = path + (key,)
        if key not in known:
            raise ConfigError(f"unknown key '{'.'.join(kpath)}'", loc.line(kpath))
        default = getattr(cls(), key)
        kwargs[key] = _coerce(default, val, kpath, loc)
    return cls(**kwargs)


def _coerce(default, val, path, loc):
    name = ".".join(path)
    line = loc.line(path)
    key = path[-1]
    if isinstance(default, (CurveSpec, FamilySpec, Tolerances, AnalyticSpec)):
        return _build(type(default), val, path, loc)
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"'{name}' must be true or false", line)
        return val
    if isinstance(default, int):
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"'{name}' must be an integer", line)
        if key in _POSITIVE and val <= 0:
            raise ConfigError(f"'{name}' must be positive", line)
        if key == "seed" and val < 0:
            raise ConfigError(f"'{name}' must be non-negative", line)
        return val
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"'{name}' must be a finite number", line)
        if key in _POSITIVE and val <= 0:
            raise ConfigError(f"'{name}' must be positive", line)
        return float(val)
    if isinstance(default, tuple):
        if not isinstance(val, list):
            raise ConfigError(f"'{name}' must be a list", line)
        ints = key in ("dimensions", "capacity_grid", "cone_m", "hardy_n")
        out = []
        for v in val:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"'{name}' must contain finite numbers", line)
            if ints and not isinstance(v, int):
                raise ConfigError(f"'{name}' must contain integers", line)
            out.append(int(v) if ints else float(v))
        if key == "center" and len(out) != 2:
            raise ConfigError(f"'{name}' must have two entries", line)
        if key in ("epsilons", "exponents", "dimensions", "capacity_grid", "cone_m", "hardy_n"):
            if not out or any(v <= 0 for v in out):
                raise ConfigError(f"'{name}' must be a non-empty list of positive values", line)
        return tuple(out)
    if default is None or isinstance(default, str):
        if not isinstance(val, str):
            raise ConfigError(f"'{name}' must be a string", line)
        return val
    raise ConfigError(f"cannot interpret '{name}'", line)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", e.lineno) from None
    loc = KeyLocator(text)
    cfg = _build(RunConfig, data, (), loc)
    if cfg.command is not None and cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command '{cfg.command}'", loc.line(("command",)))
    if command is not None and cfg.command not in (None, command):
        raise ConfigError(f"config is for '{cfg.command}', not '{command}'", loc.line(("command",)))
    if cfg.degree not in (1, 2):
        raise ConfigError("'degree' must be 1 or 2", loc.line(("degree",)))
    if cfg.family.mode < 1:
        raise ConfigError("'family.mode' must be a positive integer", loc.line(("family", "mode")))
    if len(set(cfg.epsilons)) != len(cfg.epsilons):
        raise ConfigError("'epsilons' must be distinct", loc.line(("epsilons",)))
    if cfg.tolerances.min_r2 > 1:
        raise ConfigError("'tolerances.min_r2' must be <= 1", loc.line(("tolerances", "min_r2")))
    if command is not None:
        cfg = RunConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, "command": command})
    return cfg


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}") from None
    return parse_config(text, command)
