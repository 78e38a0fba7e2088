"""Scenario files: TOML with one table per block, validated in one pass."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from ..errors import ConfigError, DomainError
from ..fracops import TimeGrid
from ..operators import DiagonalSectorialOperator, FracParams, SpectralField
from ..solver import GrowthBounds, ProblemSpec, SolverConfig

__all__ = ["Scenario", "BUILTINS", "load_scenario", "parse_scenario", "dump_scenario", "build_problem"]

PROBLEM_KINDS = ("sec5", "linear")


@dataclass(frozen=True)
class Scenario:
    name: str
    # fracparams
    alpha: float
    gamma: float
    beta: float
    T: float
    # operator
    modes: int
    shift: float
    # mesh: M intervals, M + 1 nodes
    M: int
    grading: float
    # picard
    max_iter: int
    tol: float
    relaxation: float
    radius_r: float
    residual_cap: float
    # nonlocal
    nonlocal_t: tuple[float, ...]
    nonlocal_c: tuple[float, ...]
    # bounds
    k1: float
    k2: float
    delta_decay: float
    k_bound_h3: float
    # problem
    kind: str
    u0: tuple[float, ...]
    # output
    points: int
    csv: str

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear" and not self.nonlocal_t

    def with_mesh(self, M: int) -> "Scenario":
        d = asdict(self)
        d["M"] = int(M)
        return Scenario(**d)

    def sha256(self) -> str:
        return hashlib.sha256(dump_scenario(self).encode()).hexdigest()


# (table, key) -> (field, type, default); default None marks a required key
_SCHEMA: dict[tuple[str, str], tuple[str, type, Any]] = {
    ("scenario", "name"): ("name", str, "unnamed"),
    ("fracparams", "alpha"): ("alpha", float, None),
    ("fracparams", "gamma"): ("gamma", float, None),
    ("fracparams", "beta"): ("beta", float, -0.5),
    ("fracparams", "T"): ("T", float, 1.0),
    ("operator", "modes"): ("modes", int, None),
    ("operator", "shift"): ("shift", float, 0.0),
    ("mesh", "M"): ("M", int, None),
    ("mesh", "grading"): ("grading", float, 2.0),
    ("picard", "max_iter"): ("max_iter", int, 50),
    ("picard", "tol"): ("tol", float, 1e-8),
    ("picard", "relaxation"): ("relaxation", float, 0.8),
    ("picard", "radius_r"): ("radius_r", float, 20.0),
    ("picard", "residual_cap"): ("residual_cap", float, 1e-3),
    ("nonlocal", "t"): ("nonlocal_t", tuple, ()),
    ("nonlocal", "c"): ("nonlocal_c", tuple, ()),
    ("bounds", "k1"): ("k1", float, 5.0),
    ("bounds", "k2"): ("k2", float, 0.5),
    ("bounds", "delta_decay"): ("delta_decay", float, 1.0),
    ("bounds", "k_bound_h3"): ("k_bound_h3", float, 0.2),
    ("problem", "kind"): ("kind", str, "sec5"),
    ("problem", "u0"): ("u0", tuple, (1.0,)),
    ("output", "points"): ("points", int, 0),
    ("output", "csv"): ("csv", str, "trajectory.csv"),
}
_TABLES = sorted({t for t, _ in _SCHEMA})


def _coerce(value: Any, kind: type, where: str, problems: list[str]):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where} must be a number, got {value!r}")
            return None
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where} must be an integer, got {value!r}")
            return None
        return value
    if kind is str:
        if not isinstance(value, str):
            problems.append(f"{where} must be a string, got {value!r}")
            return None
        return value
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        problems.append(f"{where} must be a list of numbers, got {value!r}")
        return None
    return tuple(float(v) for v in value)


def _validate(s: dict[str, Any], problems: list[str]) -> None:
    """Range checks; keys that are missing or mistyped (None) are skipped."""

    def have(*keys: str) -> bool:
        return all(s.get(k) is not None for k in keys)

    frac = ("alpha", "gamma", "beta", "T")
    if have(*frac):
        try:
            FracParams(s["alpha"], s["gamma"], s["beta"], s["T"])
        except DomainError as exc:
            problems.extend(str(exc).split("; "))
    else:
        ranges = {"alpha": (0.0, 1.0, False), "gamma": (0.0, 1.0, True), "beta": (-1.0, 0.0, False)}
        for key, (lo, hi, closed) in ranges.items():
            x = s.get(key)
            if x is None:
                continue
            inside = lo <= x <= hi if closed else lo < x < hi
            if not inside:
                problems.append(f"{key} must lie in {'[' if closed else '('}{lo}, {hi}{']' if closed else ')'}, got {x}")
        if have("T") and not s["T"] > 0.0:
            problems.append(f"T must be positive, got {s['T']}")
    for key in ("T", "shift", "grading", "tol", "relaxation", "radius_r", "residual_cap", "k1", "k2", "delta_decay", "k_bound_h3"):
        if have(key) and not math.isfinite(s[key]):
            problems.append(f"{key} must be finite, got {s[key]}")
    if have("nonlocal_c") and not all(math.isfinite(c) for c in s["nonlocal_c"]):
        problems.append("nonlocal.c must be finite")
    if have("modes") and s["modes"] < 1:
        problems.append(f"modes must be >= 1, got {s['modes']}")
    if have("shift") and not s["shift"] >= 0.0:
        problems.append(f"shift must be >= 0, got {s['shift']}")
    if have("M") and s["M"] < 2:
        problems.append(f"M must be >= 2, got {s['M']}")
    if have("grading") and not s["grading"] >= 1.0:
        problems.append(f"grading must be >= 1, got {s['grading']}")
    if have("max_iter") and s["max_iter"] < 1:
        problems.append(f"max_iter must be >= 1, got {s['max_iter']}")
    for key in ("tol", "radius_r", "residual_cap"):
        if have(key) and not s[key] > 0.0:
            problems.append(f"{key} must be positive, got {s[key]}")
    if have("relaxation") and not 0.0 < s["relaxation"] <= 1.0:
        problems.append(f"relaxation must lie in (0, 1], got {s['relaxation']}")
    if have("nonlocal_t", "nonlocal_c") and len(s["nonlocal_t"]) != len(s["nonlocal_c"]):
        problems.append("nonlocal.t and nonlocal.c must have equal length")
    if have("nonlocal_t", "T"):
        for ti in s["nonlocal_t"]:
            if not 0.0 < ti <= s["T"]:
                problems.append(f"nonlocal time {ti} must lie in (0, T]")
    for key in ("k1", "k2", "delta_decay", "k_bound_h3"):
        if have(key) and not s[key] >= 0.0:
            problems.append(f"{key} must be >= 0, got {s[key]}")
    if have("kind") and s["kind"] not in PROBLEM_KINDS:
        problems.append(f"problem kind must be one of {PROBLEM_KINDS}, got {s['kind']!r}")
    if have("u0", "modes"):
        if not s["u0"] or len(s["u0"]) > s["modes"]:
            problems.append("u0 needs between 1 and modes coefficients")
        elif not all(math.isfinite(v) for v in s["u0"]):
            problems.append("u0 coefficients must be finite")
    if have("points") and s["points"] < 0:
        problems.append(f"points must be >= 0, got {s['points']}")
    if have("csv") and (not s["csv"] or "/" in s["csv"] or "\\" in s["csv"]):
        problems.append("output.csv must be a plain file name")


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    problems: list[str] = []
    for table, body in raw.items():
        if table not in _TABLES or not isinstance(body, dict):
            problems.append(f"unknown table [{table}]")
            continue
        for key in body:
            if (table, key) not in _SCHEMA:
                problems.append(f"unknown key {table}.{key}")
    values: dict[str, Any] = {}
    for (table, key), (name, kind, default) in _SCHEMA.items():
        body = raw.get(table, {})
        if not isinstance(body, dict) or key not in body:
            if default is None:
                problems.append(f"missing required key {table}.{key} ({key})")
            values[name] = default
            continue
        values[name] = _coerce(body[key], kind, f"{table}.{key}", problems)
    _validate(values, problems)
    if problems:
        raise ConfigError([f"{source}: {p}" for p in problems])
    return Scenario(**values)


def _fmt(v: Any) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_scenario(sc: Scenario) -> str:
    """Canonical TOML text; parsing it gives back an equal Scenario."""
    by_field = {f.name: getattr(sc, f.name) for f in fields(sc)}
    out = []
    for table in ("scenario", "fracparams", "operator", "mesh", "picard", "nonlocal", "bounds", "problem", "output"):
        out.append(f"[{table}]")
        for (tb, key), (name, _, _) in _SCHEMA.items():
            if tb == table:
                out.append(f"{key} = {_fmt(by_field[name])}")
        out.append("")
    return "\n".join(out)


_SEC5 = """\
[scenario]
name = "example-sec5"

[fracparams]
alpha = 0.75
gamma = 0.5
beta = -0.5
T = 1.0

[operator]
modes = 32

[mesh]
M = 200
grading = 2.0

[nonlocal]
t = [0.3, 0.6]
c = [0.05, 0.05]

[problem]
kind = "sec5"
u0 = [1.0]
"""

_LINEAR = """\
[scenario]
name = "linear-demo"

[fracparams]
alpha = 0.75
gamma = 0.5

[operator]
modes = 16

[mesh]
M = 400
grading = 2.0

[problem]
kind = "linear"
u0 = [1.0]
"""

BUILTINS = {"example-sec5": _SEC5, "linear-demo": _LINEAR}


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario file, or a builtin by name (``example-sec5``, ``linear-demo``)."""
    key = str(path)
    if key in BUILTINS:
        return parse_scenario(BUILTINS[key], key)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {p}: {exc.strerror}") from None
    return parse_scenario(text, str(p))


def sec5_g(t, y, z, bz):
    """y cos z + B z."""
    return y * np.cos(z) + bz


def sec5_f(t, y, z):
    return np.sin(z)


def sec5_kernel(t, s):
    return np.exp(-(t - s))


def build_problem(sc: Scenario) -> tuple[ProblemSpec, SolverConfig, TimeGrid]:
    params = FracParams(sc.alpha, sc.gamma, sc.beta, sc.T)
    op = DiagonalSectorialOperator(sc.modes, sc.shift)
    c = np.zeros(sc.modes)
    c[: len(sc.u0)] = sc.u0
    bounds = GrowthBounds(sc.k1, sc.k2, sc.delta_decay, sc.k_bound_h3)
    nl = tuple(zip(sc.nonlocal_t, sc.nonlocal_c))
    if sc.kind == "sec5":
        spec = ProblemSpec(params, op, SpectralField(c), sec5_g, sec5_f, sec5_kernel, nl, bounds)
    else:
        spec = ProblemSpec(params, op, SpectralField(c), nonlocal_points=nl, growth_bounds=bounds)
    cfg = SolverConfig(sc.max_iter, sc.tol, sc.relaxation, 1, sc.radius_r, sc.residual_cap)
    return spec, cfg, TimeGrid(sc.T, sc.M, sc.grading)
