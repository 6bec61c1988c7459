"""Explicit time stepping for the 2D discrete transport problem.

The update solves for the new level in one algebraic step: the removal term
is treated implicitly (it only rescales the diagonal), everything else is
explicit.  With the time-step restriction satisfied the update has no
subtractions, so nonnegative data provably stays nonnegative in exact
arithmetic and, because rounding nonnegative sums stays nonnegative, in
floating point too.

``run_transient`` is written against a small problem protocol (grid, initial
field, advance, norms) and is shared with the 3D scheme.
"""

from __future__ import annotations

import inspect
import time
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericsError, StabilityError
from .operators import Workspace2D, build_workspace, scattering_product
from .phasefunc import (ConditionResult, PhaseFunction,
                        check_theta_condition_analytic,
                        check_theta_condition_c2)
from .phasespace import (Field, FloatArray, Grid2D, InflowSet, Medium,
                         classify_inflow, make_norm_mask, sup_norm)

_REL_TOL = 1e-9


@dataclass
class StabilityReport:
    """Outcome of every a-priori check the explicit scheme relies on.

    ``overall_pass`` gates transient runs (time-step condition plus at least
    one angular condition).  ``stationary_ok`` additionally requires the
    strict angular inequality, the kernel-sup condition, and a strictly
    positive lower bound on c * mu_a.
    """

    dimension: int
    dt: float
    cfl_lhs: float
    cfl_pass: bool
    c2: ConditionResult
    analytic: ConditionResult
    theta_pass: bool
    theta_pass_strict: bool
    sup_lhs: float
    sup_pass: bool
    c_mua_minus: float
    mu_star: float
    c_plus: float
    overall_pass: bool
    stationary_ok: bool
    notes: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        def f(x: float):
            return x if np.isfinite(x) else repr(float(x))
        return {
            "dimension": self.dimension,
            "dt": self.dt,
            "cfl": {"lhs": f(self.cfl_lhs), "bound": 1.0, "pass": self.cfl_pass},
            "angular_c2": self.c2.to_dict(),
            "angular_analytic": self.analytic.to_dict(),
            "theta_pass": self.theta_pass,
            "theta_pass_strict": self.theta_pass_strict,
            "kernel_sup": {"lhs": f(self.sup_lhs), "bound": 1.0,
                           "pass": self.sup_pass},
            "c_mua_minus": f(self.c_mua_minus),
            "mu_star": f(self.mu_star),
            "c_plus": f(self.c_plus),
            "overall_pass": self.overall_pass,
            "stationary_ok": self.stationary_ok,
            "notes": list(self.notes),
        }


def check_stability(grid: Grid2D, medium: Medium,
                    phase: PhaseFunction) -> StabilityReport:
    cfl_lhs = medium.c_plus * grid.dt / grid.dx1 + medium.c_plus * grid.dt / grid.dx2
    cfl_pass = bool(cfl_lhs <= 1.0)
    c2 = check_theta_condition_c2(phase, grid.dtheta, medium.mu_star)
    analytic = check_theta_condition_analytic(phase, grid.M, medium.mu_star)
    theta_pass = bool((c2.applicable and c2.passes)
                      or (analytic.applicable and analytic.passes))
    theta_strict = bool((c2.applicable and c2.passes_strict)
                        or (analytic.applicable and analytic.passes_strict))
    sup_lhs = phase.sup_bound * grid.dtheta
    sup_pass = bool(sup_lhs <= 1.0)

    notes = []
    if not cfl_pass:
        notes.append(f"time-step condition fails: {cfl_lhs:.6g} > 1")
    if not theta_pass:
        notes.append("no angular condition passes; refine the direction grid")
    overall = cfl_pass and theta_pass
    stationary_ok = (cfl_pass and theta_strict and sup_pass
                     and medium.c_mua_minus > 0.0)
    return StabilityReport(
        dimension=2, dt=grid.dt, cfl_lhs=float(cfl_lhs), cfl_pass=cfl_pass,
        c2=c2, analytic=analytic, theta_pass=theta_pass,
        theta_pass_strict=theta_strict, sup_lhs=float(sup_lhs),
        sup_pass=sup_pass, c_mua_minus=medium.c_mua_minus,
        mu_star=medium.mu_star, c_plus=medium.c_plus,
        overall_pass=overall, stationary_ok=stationary_ok, notes=notes)


def _arity(fn: Callable) -> int:
    try:
        return len(inspect.signature(fn).parameters)
    except (TypeError, ValueError):
        raise ConfigError(
            "source and boundary callables need an inspectable signature "
            "(plain functions or lambdas with named arguments)")


def _coerce_interior_source(q: Any, grid: Grid2D):
    """Return (fn(t) -> interior array or None, is_steady)."""
    if q is None:
        return (lambda t: None), True
    X1, X2, TH = grid.full_coords()
    # coordinate arrays stay broadcastable: (M1-1,1,1), (1,M2-1,1), (1,1,M)
    x1i, x2i, thi = X1[1:-1, :, :], X2[:, 1:-1, :], TH
    shape = (max(grid.M1 - 1, 0), max(grid.M2 - 1, 0), grid.M)
    if isinstance(q, (int, float)):
        if not np.isfinite(q):
            raise ConfigError("interior source must be finite")
        arr = np.full(shape, float(q))
        return (lambda t: arr), True
    if callable(q):
        n = _arity(q)
        if n == 3:
            arr = np.ascontiguousarray(
                np.broadcast_to(np.asarray(q(x1i, x2i, thi), dtype=float), shape))
            _require_finite(arr, "interior source")
            return (lambda t: arr), True
        if n == 4:
            def sample(t: float) -> FloatArray:
                arr = np.ascontiguousarray(np.broadcast_to(
                    np.asarray(q(t, x1i, x2i, thi), dtype=float), shape))
                _require_finite(arr, f"interior source at t={t}")
                return arr
            return sample, False
        raise ConfigError("interior source callable must take (x1, x2, theta) "
                          "or (t, x1, x2, theta)")
    raise ConfigError(f"unsupported interior source spec: {type(q).__name__}")


def _coerce_inflow_source(I1: Any, inflow: InflowSet):
    """Return (fn(t) -> vector over inflow entries, is_steady)."""
    k = inflow.size
    if I1 is None:
        zero = np.zeros(k)
        return (lambda t: zero), True
    if isinstance(I1, (int, float)):
        if not np.isfinite(I1):
            raise ConfigError("inflow data must be finite")
        arr = np.full(k, float(I1))
        return (lambda t: arr), True
    if callable(I1):
        cols = inflow.coords
        ncols = len(cols)
        n = _arity(I1)
        if n == ncols:
            arr = np.ascontiguousarray(np.broadcast_to(
                np.asarray(I1(*cols), dtype=float), (k,)))
            _require_finite(arr, "inflow data")
            return (lambda t: arr), True
        if n == ncols + 1:
            def sample(t: float) -> FloatArray:
                arr = np.ascontiguousarray(np.broadcast_to(
                    np.asarray(I1(t, *cols), dtype=float), (k,)))
                _require_finite(arr, f"inflow data at t={t}")
                return arr
            return sample, False
        raise ConfigError(
            f"inflow callable must take {ncols} coordinate "
            f"arguments, optionally preceded by t")
    raise ConfigError(f"unsupported inflow spec: {type(I1).__name__}")


def _require_finite(arr: FloatArray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} contains non-finite values")


@dataclass
class Problem2D:
    grid: Grid2D
    medium: Medium
    phase: PhaseFunction
    inflow: InflowSet
    workspace: Workspace2D
    norm_mask: np.ndarray
    q_fn: Callable[[float], Optional[FloatArray]]
    q_steady: bool
    i1_fn: Callable[[float], FloatArray]
    i1_steady: bool
    i0_values: FloatArray

    @property
    def dt(self) -> float:
        return self.grid.dt

    def stability_report(self) -> StabilityReport:
        return check_stability(self.grid, self.medium, self.phase)

    def initial_field(self) -> Field:
        values = self.i0_values.copy()
        values[self.inflow.index] = self.i1_fn(0.0)
        return Field(self.grid, values, 0, self.norm_mask)

    def zero_field(self) -> Field:
        values = np.zeros(self.grid.shape)
        values[self.inflow.index] = self.i1_fn(0.0)
        return Field(self.grid, values, 0, self.norm_mask)

    def q_interior(self, t: float) -> Optional[FloatArray]:
        return self.q_fn(t)

    def inflow_values(self, t: float) -> FloatArray:
        return self.i1_fn(t)

    def advance(self, fld: Field, q_now: Optional[FloatArray]) -> Field:
        """One explicit step; inflow entries are set from data at the new time."""
        ws = self.workspace
        grid = self.grid
        I = fld.values
        new = np.zeros_like(I)
        if grid.M1 >= 2 and grid.M2 >= 2:
            intr = I[1:-1, 1:-1, :]
            rhs = ws.coef0 * intr
            rhs += ws.cdt * (ws.w_im * I[:-2, 1:-1, :] + ws.w_ip * I[2:, 1:-1, :]
                             + ws.w_jm * I[1:-1, :-2, :] + ws.w_jp * I[1:-1, 2:, :])
            if ws.smat is not None:
                rhs += ws.cdt * (ws.mus_int * scattering_product(intr, ws.smat))
            else:
                from .operators import apply_K
                rhs += ws.cdt * apply_K(I, ws)[1:-1, 1:-1, :]
            if q_now is not None:
                rhs += ws.cdt * q_now
            new[1:-1, 1:-1, :] = rhs / ws.denom
        t_next = (fld.k + 1) * grid.dt
        new[self.inflow.index] = self.i1_fn(t_next)
        return Field(grid, new, fld.k + 1, self.norm_mask)


def make_problem_2d(grid: Grid2D, medium: Medium, phase: PhaseFunction,
                    q: Any = None, I0: Any = None, I1: Any = None) -> Problem2D:
    inflow = classify_inflow(grid)
    ws = build_workspace(grid, medium, phase, inflow)
    norm_mask = make_norm_mask(grid, inflow)
    q_fn, q_steady = _coerce_interior_source(q, grid)
    i1_fn, i1_steady = _coerce_inflow_source(I1, inflow)

    i0_values = np.zeros(grid.shape)
    if I0 is None:
        pass
    elif isinstance(I0, np.ndarray):
        if I0.shape != grid.shape:
            raise ConfigError(
                f"initial array has shape {I0.shape}, grid needs {grid.shape}")
        _require_finite(I0, "initial values")
        boundary_at_0 = i1_fn(0.0)
        given = I0[inflow.index]
        scale = np.maximum(np.abs(boundary_at_0), 1.0)
        if inflow.size and np.max(np.abs(given - boundary_at_0) / scale) > 1e-12:
            raise ConfigError(
                "initial array disagrees with inflow data at t=0; "
                "make them match on the inflow set")
        i0_values = I0.astype(float).copy()
    elif isinstance(I0, (int, float)):
        if not np.isfinite(I0):
            raise ConfigError("initial values must be finite")
        if grid.M1 >= 2 and grid.M2 >= 2:
            i0_values[1:-1, 1:-1, :] = float(I0)
    elif callable(I0):
        if _arity(I0) != 3:
            raise ConfigError("initial-value callable must take (x1, x2, theta)")
        if grid.M1 >= 2 and grid.M2 >= 2:
            X1, X2, TH = grid.full_coords()
            vals = np.asarray(I0(X1[1:-1, :, :], X2[:, 1:-1, :], TH),
                              dtype=float)
            i0_values[1:-1, 1:-1, :] = np.broadcast_to(
                vals, i0_values[1:-1, 1:-1, :].shape)
            _require_finite(i0_values, "initial values")
    else:
        raise ConfigError(f"unsupported initial-value spec: {type(I0).__name__}")

    return Problem2D(grid, medium, phase, inflow, ws, norm_mask,
                     q_fn, q_steady, i1_fn, i1_steady, i0_values)


@dataclass
class TransientResult:
    final: Field
    steps: int
    sup_history: FloatArray
    min_value: float
    positive: bool
    bound_satisfied: bool
    bound_history: FloatArray
    report: StabilityReport
    snapshots: list
    wall_time: float
    norms: dict


def _count_steps(dt: float, T: float) -> int:
    ratio = T / dt
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > _REL_TOL * max(abs(ratio), 1.0):
        raise ConfigError(
            f"final time {T} is not an integer multiple of dt={dt}")
    return steps


def run_transient(problem, *, enforce_stability: bool = True,
                  snapshot_steps: Optional[Iterable[int]] = None,
                  on_snapshot: Optional[Callable[[Field], None]] = None,
                  keep_snapshots: bool = False,
                  n_steps: Optional[int] = None) -> TransientResult:
    """March the explicit scheme from t=0 to t=T.

    Tracks the sup norm over interior-plus-inflow points at every level,
    the running a-priori bound ||I0|| + ||I1|| + c_plus ||q|| t_k, and the
    minimum value seen.  Raises StabilityError up front if the report fails
    and enforcement is on; raises NumericsError if non-finite values appear.
    """
    grid = problem.grid
    report = problem.stability_report()
    if enforce_stability and not report.overall_pass:
        raise StabilityError(
            "a-priori stability conditions fail; see report", report)

    steps = n_steps if n_steps is not None else _count_steps(grid.dt, grid.T)
    wanted = set(int(s) for s in snapshot_steps) if snapshot_steps else set()

    t_start = time.perf_counter()
    fld = problem.initial_field()
    sup0 = sup_norm(fld)
    n_init = sup0
    n_inflow = float(np.max(np.abs(problem.inflow_values(0.0)))) \
        if problem.inflow.size else 0.0
    n_source = 0.0

    sup_hist = np.empty(steps + 1)
    bound_hist = np.empty(steps + 1)
    sup_hist[0] = sup0
    bound_hist[0] = n_init + n_inflow
    min_value = float(np.min(fld.values[problem.norm_mask])) \
        if np.any(problem.norm_mask) else 0.0
    bound_ok = True
    snaps = []

    def record_snapshot(f: Field) -> None:
        if on_snapshot is not None:
            on_snapshot(f)
        if keep_snapshots:
            snaps.append((f.k, Field(f.grid, f.values.copy(), f.k, f.norm_mask)))

    if 0 in wanted:
        record_snapshot(fld)

    for k in range(steps):
        t_k = k * grid.dt
        q_now = problem.q_interior(t_k)
        if q_now is not None:
            n_source = max(n_source, float(np.max(np.abs(q_now))))
        fld = problem.advance(fld, q_now)
        if not np.all(np.isfinite(fld.values)):
            raise NumericsError(
                f"non-finite values at step {fld.k}", step=fld.k)
        s = sup_norm(fld)
        sup_hist[fld.k] = s
        if problem.inflow.size:
            n_inflow = max(n_inflow, float(np.max(np.abs(
                problem.inflow_values(fld.k * grid.dt)))))
        bound = n_init + n_inflow + report.c_plus * n_source * (fld.k * grid.dt)
        bound_hist[fld.k] = bound
        if s > bound * (1.0 + 1e-12) + 1e-300:
            bound_ok = False
        if np.any(problem.norm_mask):
            min_value = min(min_value,
                            float(np.min(fld.values[problem.norm_mask])))
        if fld.k in wanted:
            record_snapshot(fld)

    wall = time.perf_counter() - t_start
    return TransientResult(
        final=fld, steps=steps, sup_history=sup_hist,
        min_value=min_value, positive=bool(min_value >= 0.0),
        bound_satisfied=bound_ok, bound_history=bound_hist, report=report,
        snapshots=snaps, wall_time=wall,
        norms={"initial": n_init, "inflow": n_inflow, "source": n_source})


def integrated_intensity(fld: Field) -> FloatArray:
    """Direction-integrated intensity: dtheta-weighted sum over directions."""
    grid = fld.grid
    if grid.dimension != 2:
        raise ValueError("expected a 2D field")
    return grid.dtheta * np.sum(fld.values, axis=-1)
