"""Run configuration: INI-style ``key = value`` files in [run], [data] and [newton] sections."""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class DataConfig:
    family: str = "soliton"
    n: int = 4
    x0: float | None = None
    a: float = 1.0
    c_speed: float = 1.0
    path: str | None = None


@dataclass(frozen=True)
class NewtonConfig:
    tol_update: float = 1e-12
    tol_abs: float = 1e-14
    tol_residual: float = 1e-10
    max_iter: int = 30


@dataclass(frozen=True)
class RunConfig:
    solver: str = "compact_cheb"
    p: int = 2
    eps: float = 1.0
    c: float | None = None
    N: int | None = None
    L: float | None = None
    M: int | None = None
    Nt: int = 1000
    T: float = 1.0
    lam: str | float = "auto"
    snapshot_every: int | None = None
    diagnostics_every: int | None = None
    stop_after: int | None = None
    output: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    @property
    def snapshot_stride(self) -> int:
        if self.snapshot_every is not None:
            return self.snapshot_every
        return max(1, self.Nt // 50)

    @property
    def diagnostics_stride(self) -> int:
        return self.diagnostics_every if self.diagnostics_every is not None else self.snapshot_stride

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        """Hash of everything that determines the trajectory (not output or stopping)."""
        d = self.to_dict()
        for k in ("output", "stop_after", "snapshot_every", "diagnostics_every"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_RUN_KEYS = {
    "solver": str, "p": int, "eps": float, "c": float, "N": int, "L": float, "M": int,
    "Nt": int, "T": float, "lambda": "lam", "snapshot_every": int, "diagnostics_every": int,
    "stop_after": int, "output": str,
}
_DATA_KEYS = {"family": str, "n": int, "x0": float, "a": float, "c_speed": float, "path": str}
_NEWTON_KEYS = {"tol_update": float, "tol_abs": float, "tol_residual": float, "max_iter": int}
_SECTIONS = {"run": _RUN_KEYS, "data": _DATA_KEYS, "newton": _NEWTON_KEYS}
_REQUIRED = (("run", "Nt"), ("run", "T"), ("data", "family"))
_FAMILIES = {"mollified_step", "finite_step", "algebraic_decay", "soliton", "tabulated"}
_SOLVERS = {"compact_cheb", "fourier_ref"}


def _convert(key: str, kind, raw: str):
    raw = raw.strip()
    if kind == "lam":
        if raw == "auto":
            return "auto"
        kind = float
    try:
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if kind is float:
            return float(eval_number(raw))
        return raw
    except (ValueError, TypeError):
        raise ConfigError(key, f"expected {getattr(kind, '__name__', kind)}, got {raw!r}") from None


_PI_RE = re.compile(r"^([+-]?(?:\d+\.?\d*(?:[eE][+-]?\d+)?)?)\*?pi(?:/(\d+\.?\d*))?$")


def eval_number(text: str) -> float:
    """Float literal, or a multiple of pi such as '-5*pi' or 'pi/2'."""
    t = text.replace(" ", "")
    m = _PI_RE.match(t)
    if m is None:
        return float(t)
    coef = {"": 1.0, "+": 1.0, "-": -1.0}.get(m.group(1))
    if coef is None:
        coef = float(m.group(1))
    return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)


def _locate(key: str) -> tuple[str, str]:
    if "." in key:
        section, _, name = key.partition(".")
        if section not in _SECTIONS or name not in _SECTIONS[section]:
            raise ConfigError(key, "unknown key")
        return section, name
    hits = [s for s, keys in _SECTIONS.items() if key in keys]
    if not hits:
        raise ConfigError(key, "unknown key")
    return hits[0], key


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate config text; ``overrides`` maps (section.)key to raw strings."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    raw: dict[str, dict[str, str]] = {s: {} for s in _SECTIONS}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        for key, value in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            raw[section][key] = value
    for key, value in (overrides or {}).items():
        section, name = _locate(key)
        raw[section][name] = str(value)

    for section, key in _REQUIRED:
        if key not in raw[section]:
            raise ConfigError(key, "missing required field")
    values = {s: {} for s in _SECTIONS}
    for section, entries in raw.items():
        for key, value in entries.items():
            kind = _SECTIONS[section][key]
            name = "lam" if key == "lambda" else key
            values[section][name] = _convert(key, kind, value)
    cfg = RunConfig(
        **values["run"],
        data=DataConfig(**values["data"]),
        newton=NewtonConfig(**values["newton"]),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.solver not in _SOLVERS:
        raise ConfigError("solver", f"must be one of {sorted(_SOLVERS)}")
    for key in ("Nt", "T", "eps"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(key, "must be positive")
    if cfg.p < 2:
        raise ConfigError("p", "must be an integer >= 2")
    if cfg.solver == "compact_cheb":
        for key in ("N", "c"):
            if getattr(cfg, key) is None:
                raise ConfigError(key, "required for solver compact_cheb")
        if cfg.N < 4:
            raise ConfigError("N", "must be >= 4")
        if not cfg.c > 0:
            raise ConfigError("c", "must be positive")
    else:
        for key in ("L", "M"):
            if getattr(cfg, key) is None:
                raise ConfigError(key, "required for solver fourier_ref")
        if cfg.M < 8 or cfg.M % 2:
            raise ConfigError("M", "must be even and >= 8")
        if not cfg.L > 0:
            raise ConfigError("L", "must be positive")
    if cfg.lam != "auto" and cfg.lam < 0:
        raise ConfigError("lambda", "must be 'auto' or nonnegative")
    for key in ("snapshot_every", "diagnostics_every", "stop_after"):
        val = getattr(cfg, key)
        if val is not None and val < 1:
            raise ConfigError(key, "must be >= 1")
    d = cfg.data
    if d.family not in _FAMILIES:
        raise ConfigError("family", f"must be one of {sorted(_FAMILIES)}")
    if d.n < 1:
        raise ConfigError("n", "must be a positive integer")
    if d.family == "tabulated" and not d.path:
        raise ConfigError("path", "required for tabulated data")
    if d.family == "algebraic_decay" and d.a < 0.5:
        raise ConfigError("a", "must be >= 1/2")
    if d.c_speed <= 0:
        raise ConfigError("c_speed", "must be positive")
    nw = cfg.newton
    if not nw.tol_update > 0:
        raise ConfigError("tol_update", "must be positive")
    if nw.max_iter < 1:
        raise ConfigError("max_iter", "must be >= 1")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), overrides)


def dump_config(cfg: RunConfig) -> str:
    """Config text that parses back to ``cfg``."""
    lines = ["[run]"]
    for f in fields(RunConfig):
        if f.name in ("data", "newton"):
            continue
        val = getattr(cfg, f.name)
        if val is not None:
            lines.append(f"{'lambda' if f.name == 'lam' else f.name} = {val!r}".replace("'", ""))
    for section, obj in (("data", cfg.data), ("newton", cfg.newton)):
        lines.append(f"\n[{section}]")
        for f in fields(obj):
            val = getattr(obj, f.name)
            if val is not None:
                lines.append(f"{f.name} = {val!r}".replace("'", ""))
    return "\n".join(lines) + "\n"
