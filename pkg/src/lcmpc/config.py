"""Scenario files: flat ``key = value`` pairs grouped in ``[section]`` headers.

Recognised sections are ``[grid]``, ``[disturbance.N]`` (one per harmonic),
``[limit_cycle]``, ``[controller]`` and ``[simulation]``. Numeric values may be
arithmetic expressions using ``pi``, ``atan``, ``atan2``, ``sqrt``, ``sin`` and
``cos``, so that phases such as ``atan(3/4) + pi/2`` are kept exact.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .grid_model import GridCircuitParams, HarmonicComponent
from .simulator import Bootstrap, InitialState, Mode, SimulationConfig


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)
        self.line = line


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"atan": math.atan, "atan2": math.atan2, "sqrt": math.sqrt, "sin": math.sin,
          "cos": math.cos}


def eval_number(text: str) -> float:
    """Evaluate a restricted arithmetic expression."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
        return float(ev(tree))
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None


@dataclass
class _Entry:
    value: str
    line: int


def parse_sections(text: str, source: str = "<config>") -> dict:
    """Split the file into ``{section: {key: _Entry}}`` keeping line numbers."""
    sections: dict = {}
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", no, source)
            current = line[1:-1].strip()
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", no, source)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no, source)
        if current is None:
            raise ConfigError("key outside of any section", no, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", no, source)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", no, source)
        sections[current][key] = _Entry(value, no)
    return sections


_GRID_KEYS = {"R1_ohm": "R1", "R2_ohm": "R2", "L2_H": "L2", "C2_F": "C2", "f_Hz": "f",
              "vs_amplitude_V": "vs_amplitude"}
_LC_KEYS = {"mu": "mu", "alpha": "alpha"}
_CTRL_KEYS = {"Hp": "Hp", "h": "h", "optimality_tol": "optimality_tol",
              "step_tol": "step_tol", "max_iters": "max_iters", "gradient": "gradient"}
_SIM_KEYS = {"tau_s": "tau", "total_time_s": "total_time", "mode": "mode",
             "bootstrap": "bootstrap", "initial_state": "initial_state"}
_INT_FIELDS = {"Hp", "h", "max_iters"}


def load_config(text: str, source: str = "<config>") -> SimulationConfig:
    sections = parse_sections(text, source)
    kwargs: dict = {}
    grid: dict = {}
    dist: list = []

    def number(entry: _Entry, integer: bool = False):
        try:
            v = eval_number(entry.value)
        except ValueError as exc:
            raise ConfigError(str(exc), entry.line, source) from None
        if integer:
            if v != int(v):
                raise ConfigError(f"expected an integer, got {entry.value!r}", entry.line, source)
            return int(v)
        return v

    def enum_value(entry: _Entry, cls):
        try:
            return cls(entry.value.strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"{entry.value!r} is not one of {choices}", entry.line, source) from None

    def unknown(section, key, entry):
        raise ConfigError(f"unknown key {key!r} in [{section}]", entry.line, source)

    for name, entries in sections.items():
        if name == "grid":
            for key, e in entries.items():
                if key not in _GRID_KEYS:
                    unknown(name, key, e)
                grid[_GRID_KEYS[key]] = number(e)
        elif name.startswith("disturbance."):
            comp = {}
            for key, e in entries.items():
                if key == "order":
                    comp["order"] = number(e, integer=True)
                elif key == "amplitude_A":
                    comp["amplitude"] = number(e)
                elif key == "phase_rad":
                    comp["phase"] = number(e)
                else:
                    unknown(name, key, e)
            first = min((e.line for e in entries.values()), default=None)
            if "order" not in comp or "amplitude" not in comp:
                raise ConfigError(f"[{name}] needs 'order' and 'amplitude_A'", first, source)
            try:
                dist.append((name, HarmonicComponent(**comp)))
            except ValueError as exc:
                raise ConfigError(str(exc), first, source) from None
        elif name in ("limit_cycle", "controller", "simulation"):
            table = {"limit_cycle": _LC_KEYS, "controller": _CTRL_KEYS, "simulation": _SIM_KEYS}[name]
            for key, e in entries.items():
                if key not in table:
                    unknown(name, key, e)
                field = table[key]
                if field == "mode":
                    kwargs["mode"] = enum_value(e, Mode)
                elif field == "bootstrap":
                    kwargs["bootstrap"] = enum_value(e, Bootstrap)
                elif field == "initial_state":
                    kwargs["initial_state"] = enum_value(e, InitialState)
                elif field == "gradient":
                    g = e.value.strip().lower()
                    if g not in ("analytic", "finite_difference"):
                        raise ConfigError("gradient must be 'analytic' or 'finite_difference'",
                                          e.line, source)
                    kwargs["analytic_gradient"] = g == "analytic"
                else:
                    kwargs[field] = number(e, integer=field in _INT_FIELDS)
        else:
            first = min((e.line for e in entries.values()), default=None)
            raise ConfigError(f"unknown section [{name}]", first, source)

    try:
        kwargs["grid"] = GridCircuitParams(**grid)
        kwargs["disturbance"] = tuple(c for _, c in sorted(dist, key=lambda t: _dist_index(t[0])))
        return SimulationConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), None, source) from None


def _dist_index(name: str):
    suffix = name.split(".", 1)[1]
    return (0, int(suffix)) if suffix.isdigit() else (1, suffix)


def dump_config(cfg: SimulationConfig) -> str:
    """Serialise with ``repr`` floats so that loading gives back identical values."""
    g = cfg.grid
    out = ["[grid]"]
    for key, field in _GRID_KEYS.items():
        out.append(f"{key} = {getattr(g, field)!r}")
    for i, c in enumerate(cfg.disturbance, start=1):
        out += ["", f"[disturbance.{i}]", f"order = {c.order}",
                f"amplitude_A = {float(c.amplitude)!r}", f"phase_rad = {float(c.phase)!r}"]
    out += ["", "[limit_cycle]", f"mu = {cfg.mu!r}", f"alpha = {cfg.alpha!r}"]
    out += ["", "[controller]", f"Hp = {cfg.Hp}", f"h = {cfg.h}",
            f"optimality_tol = {cfg.optimality_tol!r}", f"step_tol = {cfg.step_tol!r}",
            f"max_iters = {cfg.max_iters}",
            f"gradient = {'analytic' if cfg.analytic_gradient else 'finite_difference'}"]
    out += ["", "[simulation]", f"tau_s = {cfg.tau!r}", f"total_time_s = {cfg.total_time!r}",
            f"mode = {cfg.mode.value}", f"bootstrap = {cfg.bootstrap.value}",
            f"initial_state = {cfg.initial_state.value}"]
    return "\n".join(out) + "\n"


def bundled_config_text(name: str = "paper.cfg") -> str:
    return resources.files("lcmpc").joinpath("data").joinpath(name).read_text()


def resolve_config(path: str) -> tuple[str, str]:
    """Return ``(text, source)`` for a file path or the name of a bundled file."""
    p = Path(path)
    if p.is_file():
        return p.read_text(), str(p)
    try:
        return bundled_config_text(p.name), f"<bundled {p.name}>"
    except (FileNotFoundError, OSError):
        raise FileNotFoundError(path) from None
