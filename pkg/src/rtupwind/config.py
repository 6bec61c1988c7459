"""JSON run configuration: validation, tiny expression language, builders.

Expressions are parsed by a recursive-descent parser over ``+ - * /``,
unary minus, parentheses, the constant ``pi``, and the functions ``exp``,
``sin``, ``cos``.  Which variables are in scope depends on the field:
coefficients see space only, sources and boundary data see time, space,
and angle.  Mentioning ``t`` is what marks a run as time-dependent, so
stationary solves reject configs whose data uses it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigError
from .phasefunc import PhaseFunction, hg2d, hg3d, load_kernel_table, uniform2d, uniform3d
from .phasespace import build_grid2d, build_grid3d, build_medium
from .scheme3d import Problem3D, make_problem_3d
from .transient import Problem2D, make_problem_2d

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)"
                    r"|([()+\-*/]))")

_FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_CONSTANTS = {"pi": math.pi}


class _Parser:
    def __init__(self, text: str, variables: set, path: str):
        self.text = text
        self.path = path
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ConfigError(
                    f"{path}: cannot tokenize expression at position {pos}: "
                    f"{text[pos:pos + 12]!r}")
            num, name, op = m.groups()
            if num is not None:
                self.tokens.append(("num", float(num)))
            elif name is not None:
                self.tokens.append(("name", name))
            elif op is not None:
                self.tokens.append(("op", op))
            pos = m.end()
        self.tokens.append(("end", ""))
        self.i = 0
        self.variables = variables
        self.used: set = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ConfigError(f"{self.path}: expected {op!r}, got {val!r}")

    def parse(self):
        node = self.expr()
        kind, val = self.peek()
        if kind != "end":
            raise ConfigError(f"{self.path}: trailing input from {val!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = ("add" if val == "+" else "sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                node = ("mul" if val == "*" else "div", node, rhs)
            else:
                return node

    def unary(self):
        kind, val = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            if val in _CONSTANTS:
                return ("num", _CONSTANTS[val])
            if val in self.variables:
                self.used.add(val)
                return ("var", val)
            raise ConfigError(
                f"{self.path}: unknown name {val!r}; variables here are "
                f"{sorted(self.variables)}, functions {sorted(_FUNCTIONS)}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ConfigError(f"{self.path}: unexpected {val!r}")


def _evaluate(node, env):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_evaluate(node[1], env)
    if op == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    a = _evaluate(node[1], env)
    b = _evaluate(node[2], env)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise AssertionError(f"bad node {op}")


def compile_expression(text: str, variables: tuple, path: str):
    """Compile to (callable(**vars) -> array, used-variable set)."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"{path}: expected a non-empty expression string")
    parser = _Parser(text, set(variables), path)
    ast = parser.parse()

    def fn(**env):
        return _evaluate(ast, env)

    return fn, parser.used


def _get(d: dict, key: str, path: str, required: bool = True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return d[key]


def _num(d: dict, key: str, path: str, required: bool = True, default=None):
    v = _get(d, key, path, required, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(d: dict, key: str, path: str, required: bool = True, default=None):
    v = _get(d, key, path, required, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


@dataclass
class RunConfig:
    raw: dict
    dimension: int
    mode: str                  # "transient" | "stationary"
    tol: float
    max_iters: Optional[int]
    snapshot_times: Optional[list]
    write_intensity: bool

    def build(self):
        """Return (problem, grid, medium, phase)."""
        if self.dimension == 2:
            return _build_2d(self.raw)
        return _build_3d(self.raw)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    dim = _int(raw, "dimension", "", required=False, default=2)
    if dim not in (2, 3):
        raise ConfigError(f"dimension: must be 2 or 3, got {dim}")

    run = _get(raw, "run", "", required=False, default={})
    if not isinstance(run, dict):
        raise ConfigError("run: must be an object")
    mode = _get(run, "mode", "run", required=False, default="transient")
    if mode not in ("transient", "stationary"):
        raise ConfigError(f"run.mode: must be transient or stationary, "
                          f"got {mode!r}")
    tol = _num(run, "tol", "run", required=False, default=1e-12)
    max_iters = _int(run, "max_iters", "run", required=False, default=None)

    out = _get(raw, "output", "", required=False, default={})
    if not isinstance(out, dict):
        raise ConfigError("output: must be an object")
    snap = _get(out, "snapshot_times", "output", required=False, default=None)
    if snap is not None:
        if (not isinstance(snap, list)
                or any(isinstance(s, bool) or not isinstance(s, (int, float))
                       for s in snap)):
            raise ConfigError("output.snapshot_times: must be a list of times")
        snap = [float(s) for s in snap]
    intensity = bool(_get(out, "intensity", "output", required=False,
                          default=True))

    cfg = RunConfig(raw=raw, dimension=dim, mode=mode, tol=float(tol),
                    max_iters=max_iters, snapshot_times=snap,
                    write_intensity=intensity)
    # validate the cheap parts eagerly so errors carry field paths; the
    # full problem (stencil workspace and such) is built on demand
    grid = _build_grid(raw, dim)
    _build_medium_from(raw, grid, dim)
    _build_kernel(raw, dim)
    _field_spec(raw, "source", dim, with_time=True)
    _field_spec(raw, "boundary", dim, with_time=True)
    _field_spec(raw, "initial", dim, with_time=False)
    return cfg


def _coefficient_spec(med: dict, key: str, dim: int):
    v = _get(med, key, "medium")
    if isinstance(v, bool):
        raise ConfigError(f"medium.{key}: expected number or expression")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        variables = ("x1", "x2") if dim == 2 else ("x1", "x2", "x3")
        fn, _ = compile_expression(v, variables, f"medium.{key}")
        if dim == 2:
            return lambda x1, x2: fn(x1=x1, x2=x2)
        return lambda x1, x2, x3: fn(x1=x1, x2=x2, x3=x3)
    raise ConfigError(f"medium.{key}: expected number or expression string")


def _build_kernel(raw: dict, dim: int) -> PhaseFunction:
    ker = _get(raw, "kernel", "")
    if not isinstance(ker, dict):
        raise ConfigError("kernel: must be an object")
    ktype = _get(ker, "type", "kernel")
    if ktype == "hg":
        gval = _num(ker, "g", "kernel")
        try:
            return hg2d(gval) if dim == 2 else hg3d(gval)
        except ValueError as exc:
            raise ConfigError(f"kernel.g: {exc}")
    if ktype == "uniform":
        return uniform2d() if dim == 2 else uniform3d()
    if ktype == "table":
        path = _get(ker, "path", "kernel")
        decay = _get(ker, "analytic_decay", "kernel", required=False)
        if decay is not None:
            if (not isinstance(decay, list) or len(decay) != 2):
                raise ConfigError("kernel.analytic_decay: expected [C, r]")
            decay = (float(decay[0]), float(decay[1]))
        return load_kernel_table(path, dimension=dim, analytic_decay=decay)
    raise ConfigError(f"kernel.type: unknown type {ktype!r}")


_ANGLE_VARS = {2: ("theta",), 3: ("theta", "phi")}
_SPACE_VARS = {2: ("x1", "x2"), 3: ("x1", "x2", "x3")}


def _field_spec(raw: dict, key: str, dim: int, with_time: bool):
    """Turn a config block into None, a number, or a callable with the
    positional signature the problem builders sniff for steadiness."""
    block = _get(raw, key, "", required=False, default={"type": "zero"})
    if not isinstance(block, dict):
        raise ConfigError(f"{key}: must be an object")
    btype = _get(block, "type", key)
    if btype == "zero":
        return None
    if btype == "constant":
        return _num(block, "value", key)
    if btype == "expression":
        text = _get(block, "expr", key)
        space = _SPACE_VARS[dim]
        angle = _ANGLE_VARS[dim]
        variables = (("t",) if with_time else ()) + space + angle
        fn, used = compile_expression(text, variables, f"{key}.expr")
        names = space + angle
        if with_time and "t" in used:
            if dim == 2:
                return lambda t, x1, x2, theta: fn(
                    t=t, x1=x1, x2=x2, theta=theta)
            return lambda t, x1, x2, x3, theta, phi: fn(
                t=t, x1=x1, x2=x2, x3=x3, theta=theta, phi=phi)
        if dim == 2:
            return lambda x1, x2, theta: fn(x1=x1, x2=x2, theta=theta)
        return lambda x1, x2, x3, theta, phi: fn(
            x1=x1, x2=x2, x3=x3, theta=theta, phi=phi)
    if btype == "gaussian_theta":
        if key != "boundary":
            raise ConfigError(f"{key}.type: gaussian_theta is boundary-only")
        if dim != 2:
            raise ConfigError("boundary.type: gaussian_theta needs dimension 2")
        center = _num(block, "center", key)
        sigma = _num(block, "sigma", key)
        if sigma <= 0:
            raise ConfigError("boundary.sigma: must be positive")
        strip = _get(block, "strip", key)
        if (not isinstance(strip, list) or len(strip) != 2
                or strip[0] >= strip[1]):
            raise ConfigError("boundary.strip: expected [lo, hi] with lo < hi")
        face = _get(block, "face", key)
        if face not in ("x1=0", "x1=L1", "x2=0", "x2=L2"):
            raise ConfigError(f"boundary.face: unknown face {face!r}")
        lo, hi = float(strip[0]), float(strip[1])
        amp = 1.0 / (math.sqrt(2.0 * math.pi) * sigma)

        grid_block = _get(raw, "grid", "")
        L1 = _num(grid_block, "L1", "grid")
        L2 = _num(grid_block, "L2", "grid")
        face_coord = {"x1=0": 0.0, "x1=L1": L1, "x2=0": 0.0, "x2=L2": L2}[face]
        on_x1_face = face.startswith("x1")

        def gauss(x1, x2, theta):
            held = x1 if on_x1_face else x2
            along = x2 if on_x1_face else x1
            on_face = np.abs(held - face_coord) <= 1e-9 * max(L1, L2, 1.0)
            in_strip = (along >= lo) & (along <= hi)
            prof = amp * np.exp(-(theta - center) ** 2 / (2.0 * sigma * sigma))
            return np.where(on_face & in_strip, prof, 0.0)

        return gauss
    raise ConfigError(f"{key}.type: unknown type {btype!r}")


def _build_grid(raw: dict, dim: int):
    g = _get(raw, "grid", "")
    if not isinstance(g, dict):
        raise ConfigError("grid: must be an object")
    try:
        if dim == 2:
            return build_grid2d(
                L1=_num(g, "L1", "grid"), L2=_num(g, "L2", "grid"),
                M1=_int(g, "M1", "grid"), M2=_int(g, "M2", "grid"),
                M=_int(g, "M", "grid"), dt=_num(g, "dt", "grid"),
                T=_num(g, "T", "grid"))
        return build_grid3d(
            L1=_num(g, "L1", "grid"), L2=_num(g, "L2", "grid"),
            L3=_num(g, "L3", "grid"),
            M1=_int(g, "M1", "grid"), M2=_int(g, "M2", "grid"),
            M3=_int(g, "M3", "grid"),
            Mtheta=_int(g, "Mtheta", "grid"), Mphi=_int(g, "Mphi", "grid"),
            dt=_num(g, "dt", "grid"), T=_num(g, "T", "grid"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}")


def _build_medium_from(raw: dict, grid, dim: int):
    med = _get(raw, "medium", "")
    if not isinstance(med, dict):
        raise ConfigError("medium: must be an object")
    declared = _get(med, "declared", "medium", required=False)
    if declared is not None and not isinstance(declared, dict):
        raise ConfigError("medium.declared: must be an object")
    try:
        return build_medium(
            grid,
            c=_coefficient_spec(med, "c", dim),
            mu_a=_coefficient_spec(med, "mu_a", dim),
            mu_s=_coefficient_spec(med, "mu_s", dim),
            declared=declared)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"medium: {exc}")


def _build_2d(raw: dict):
    grid = _build_grid(raw, 2)
    medium = _build_medium_from(raw, grid, 2)
    phase = _build_kernel(raw, 2)
    q = _field_spec(raw, "source", 2, with_time=True)
    I1 = _field_spec(raw, "boundary", 2, with_time=True)
    I0 = _field_spec(raw, "initial", 2, with_time=False)
    problem = make_problem_2d(grid, medium, phase, q=q, I0=I0, I1=I1)
    return problem, grid, medium, phase


def _build_3d(raw: dict):
    grid = _build_grid(raw, 3)
    medium = _build_medium_from(raw, grid, 3)
    phase = _build_kernel(raw, 3)
    q = _field_spec(raw, "source", 3, with_time=True)
    I1 = _field_spec(raw, "boundary", 3, with_time=True)
    I0 = _field_spec(raw, "initial", 3, with_time=False)
    problem = make_problem_3d(grid, medium, phase, q=q, I0=I0, I1=I1)
    return problem, grid, medium, phase


def snapshot_steps(cfg: RunConfig, grid) -> list:
    """Map requested snapshot times to step indices; default is quarters."""
    times = cfg.snapshot_times
    if times is None:
        times = [grid.T * f for f in (0.25, 0.5, 0.75, 1.0)]
    steps = []
    for t in times:
        ratio = t / grid.dt
        k = int(round(ratio))
        if abs(ratio - k) > 1e-9 * max(abs(ratio), 1.0):
            raise ConfigError(
                f"output.snapshot_times: {t} is not a multiple of dt={grid.dt}")
        if not 0 <= k <= round(grid.T / grid.dt):
            raise ConfigError(
                f"output.snapshot_times: {t} lies outside [0, T]")
        steps.append(k)
    return sorted(set(steps))
