"""Flat ``key = value`` run configuration.

One entry per line, dotted keys, ``#`` starts a comment::

    kind = damped
    grid.L = 10pi
    grid.T = 150
    grid.nx = 315
    grid.r = 0.5
    phi = cosine(0.2)
    psi = zero
    a = exp_decay
    h = exp_decay(1)

Function-valued keys take a family name with optional numeric arguments.
Lengths accept a trailing ``pi`` (``10pi``). Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .bounds import ViscoBoundParams
from .core import (
    Grid1D,
    KINDS,
    ProblemSpec,
    RelaxationKernel,
    SpaceFunction,
    TimeFunction,
    ValidationError,
    build_grid,
    grid_for_ratio,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "parse_function", "FAMILIES"]


class ConfigError(ValidationError):
    """A configuration key is missing, unknown or malformed."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _families(cls, names) -> dict[str, Callable]:
    return {n: getattr(cls, n) for n in names}


FAMILIES = {
    "time": _families(TimeFunction, ("zero", "constant", "exp_decay", "sine", "saturating", "sqrt")),
    "space": _families(SpaceFunction, ("zero", "constant", "cosine", "sine", "exp_decay", "sin_squared",
                                       "shifted_square", "abs", "step", "mixed_mode")),
    "kernel": _families(RelaxationKernel, ("zero", "constant", "exp_shift", "power", "log_type")),
}

_FN_KEYS = {"phi": "space", "psi": "space", "a": "space", "f": "time", "h": "time", "g": "kernel"}


def _parse_float(key: str, raw: str) -> float:
    text = raw.strip().replace(" ", "")
    mult = 1.0
    if text.endswith("pi"):
        text, mult = text[:-2], math.pi
        if text in ("", "+"):
            text = "1"
        elif text.endswith("*"):
            text = text[:-1]
    try:
        return float(text) * mult
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None


def _parse_bool(key: str, raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(key, f"expected true/false, got {raw!r}")


_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_function(key: str, raw: str, kind: str):
    """``family`` or ``family(arg, ...)`` -> descriptor from the ``kind`` registry."""
    m = _CALL.match(raw)
    if not m:
        raise ConfigError(key, f"cannot parse function {raw!r}")
    name, args = m.group(1), m.group(2)
    reg = FAMILIES[kind]
    if name not in reg:
        raise ConfigError(key, f"unknown {kind} family {name!r}; choose from {', '.join(sorted(reg))}")
    vals = []
    if args and args.strip():
        vals = [_parse_float(key, a) for a in args.split(",")]
    if name == "mixed_mode" and vals:
        vals[0] = int(vals[0])
    try:
        return reg[name](*vals)
    except TypeError as e:
        raise ConfigError(key, f"bad arguments for {name}: {e}") from None


# key -> (parser, default)
_SCALARS: dict[str, tuple[Callable[[str, str], Any], Any]] = {
    "grid.L": (_parse_float, None),
    "grid.T": (_parse_float, None),
    "grid.nx": (_parse_int, None),
    "grid.nt": (_parse_int, None),
    "grid.r": (_parse_float, None),
    "init_order": (lambda k, v: v.strip(), "first"),
    "allow_cfl_violation": (_parse_bool, False),
    "history_cap": (_parse_int, None),
    "energy.stride": (_parse_int, None),
    "energy.residual": (_parse_bool, False),
    "bound.enabled": (_parse_bool, False),
    "bound.margin": (_parse_float, 0.05),
    "bound.alpha": (_parse_float, None),
    "bound.delta": (_parse_float, None),
    "bound.eps": (_parse_float, ViscoBoundParams.eps),
    "bound.eps1": (_parse_float, ViscoBoundParams.eps1),
    "bound.eps2": (_parse_float, ViscoBoundParams.eps2),
    "bound.c": (_parse_float, ViscoBoundParams.c),
    "bound.kappa": (_parse_float, ViscoBoundParams.kappa),
    "bound.xi_floor": (_parse_float, ViscoBoundParams.xi_floor),
    "fit.t_a": (_parse_float, None),
    "fit.t_b": (_parse_float, None),
    "output.dir": (lambda k, v: v.strip(), "out"),
    "output.name": (lambda k, v: v.strip(), "run"),
    "output.svg": (_parse_bool, True),
    "output.log_scale": (_parse_bool, False),
}

KNOWN_KEYS = frozenset(_SCALARS) | frozenset(_FN_KEYS) | {"kind"}


@dataclass
class RunConfig:
    """Parsed configuration. ``raw`` keeps the text values for echoing into outputs."""

    raw: dict[str, str]
    kind: str
    grid: Grid1D
    functions: dict[str, Any]
    options: dict[str, Any] = field(default_factory=dict)

    def problem(self) -> ProblemSpec:
        fn = self.functions
        return ProblemSpec(kind=self.kind, grid=self.grid, phi=fn["phi"], psi=fn["psi"],
                           f=fn.get("f", TimeFunction.zero()), h=fn.get("h", TimeFunction.zero()),
                           a=fn.get("a"), g=fn.get("g"), init_order=self.options["init_order"],
                           allow_cfl_violation=self.options["allow_cfl_violation"],
                           history_cap=self.options["history_cap"])

    def with_value(self, key: str, value: str) -> "RunConfig":
        raw = dict(self.raw)
        raw[key] = value
        return parse_config(raw)

    @property
    def output_dir(self) -> Path:
        return Path(self.options["output.dir"])

    def bound_params(self) -> ViscoBoundParams:
        o = self.options
        return ViscoBoundParams(eps=o["bound.eps"], eps1=o["bound.eps1"], eps2=o["bound.eps2"], c=o["bound.c"],
                                kappa=o["bound.kappa"], xi_floor=o["bound.xi_floor"])


def parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line.strip()!r}")
        k, v = (s.strip() for s in body.split("=", 1))
        if k in out:
            raise ConfigError(k, f"duplicate key (line {lineno})")
        out[k] = v
    return out


def parse_config(source: str | dict) -> RunConfig:
    """Validate a config given as text or as an already-split key/value dict."""
    raw = parse_lines(source) if isinstance(source, str) else dict(source)
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    kind = raw.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")

    opts = {}
    for key, (parse, default) in _SCALARS.items():
        opts[key] = parse(key, raw[key]) if key in raw else default
    if opts["init_order"] not in ("first", "second"):
        raise ConfigError("init_order", "must be 'first' or 'second'")
    if opts["energy.stride"] is None:
        # the history term of the modified energy costs O(n nx) per sample
        opts["energy.stride"] = 10 if kind == "viscoelastic" else 1
    if opts["energy.stride"] < 1:
        raise ConfigError("energy.stride", "must be >= 1")

    for key in ("grid.L", "grid.T", "grid.nx"):
        if opts[key] is None:
            raise ConfigError(key, "required key missing")
    if (opts["grid.nt"] is None) == (opts["grid.r"] is None):
        raise ConfigError("grid.nt", "give exactly one of grid.nt and grid.r")
    try:
        if opts["grid.nt"] is not None:
            grid = build_grid(opts["grid.L"], opts["grid.T"], opts["grid.nx"], opts["grid.nt"])
        else:
            grid = grid_for_ratio(opts["grid.L"], opts["grid.T"], opts["grid.nx"], opts["grid.r"])
    except ValidationError as e:
        raise ConfigError("grid", str(e)) from None

    required = ["phi", "psi"] + {"damped": ["a"], "viscoelastic": ["g"], "classical": []}[kind]
    for key in required:
        if key not in raw:
            raise ConfigError(key, f"required for kind = {kind}")
    if kind != "damped" and "a" in raw:
        raise ConfigError("a", f"damping is only allowed for kind = damped, not {kind}")
    if kind != "viscoelastic" and "g" in raw:
        raise ConfigError("g", f"a relaxation kernel is only allowed for kind = viscoelastic, not {kind}")
    functions = {k: parse_function(k, raw[k], _FN_KEYS[k]) for k in _FN_KEYS if k in raw}
    cfg = RunConfig(raw=raw, kind=kind, grid=grid, functions=functions, options=opts)
    try:
        cfg.problem()
    except ValidationError as e:
        raise ConfigError("kind", str(e)) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(str(p), f"cannot read config: {e.strerror}") from None
    return parse_config(text)
