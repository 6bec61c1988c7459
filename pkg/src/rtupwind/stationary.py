"""Stationary transport solved by time marching to the fixed point.

With time-independent data the explicit update is a contraction on the sup
norm whenever the time-step condition holds, the strict angular condition
holds, the kernel-sup condition holds, and c * mu_a is bounded away from
zero.  The contraction factor

    rho = (1 + (c mu_a)^- dt (1/mu_* + lambda)) / (1 + (c mu_a)^- dt (1/mu_* + 1))

is computable a priori; lambda < 1 is the angular-condition ratio (the
smaller of the two routes, when both apply).  Successive-difference norms
shrink at least geometrically with factor rho, which also converts the last
residual into an error bound against the fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, StabilityError
from .phasespace import Field, FloatArray, Medium, sup_norm
from .transient import StabilityReport

_RESIDUAL_FLOOR = 1e-15


def contraction_lambda(report: StabilityReport) -> Optional[float]:
    """Angular-condition ratio; the smaller route wins.  None if neither
    applicable route is strictly below one."""
    candidates = []
    for cond in (report.c2, report.analytic):
        if cond.applicable and np.isfinite(cond.lhs) and cond.bound > 0:
            candidates.append(cond.lhs / cond.bound)
    good = [c for c in candidates if c < 1.0]
    if not good:
        return None
    return min(good)


def rho_bound(medium: Medium, dt: float, lam: float) -> float:
    if not (0.0 <= lam < 1.0):
        raise ValueError(f"contraction needs lambda in [0, 1), got {lam}")
    if medium.c_mua_minus <= 0.0:
        raise ValueError("contraction needs inf(c * mu_a) > 0")
    if math.isinf(medium.mu_star):
        inv_star = 0.0
    else:
        inv_star = 1.0 / medium.mu_star
    a = medium.c_mua_minus * dt
    return (1.0 + a * (inv_star + lam)) / (1.0 + a * (inv_star + 1.0))


@dataclass
class SteadyResult:
    field: Field
    iterations: int
    converged: bool
    residuals: FloatArray
    rho: float
    lam: float
    tol: float
    error_bound: float
    report: StabilityReport


def solve_stationary(problem, *, tol: float = 1e-12,
                     max_iters: Optional[int] = None,
                     initial: Optional[Field] = None) -> SteadyResult:
    """Iterate the explicit update with frozen data until the sup-norm
    difference between consecutive iterates drops below tol.

    Refuses (StabilityError) unless every contraction hypothesis holds.
    The initial iterate defaults to zero away from the inflow set; a warm
    start can be supplied.
    """
    if not (problem.q_steady and problem.i1_steady):
        raise ConfigError("stationary solve needs time-independent source "
                          "and inflow data")
    report = problem.stability_report()
    if not report.stationary_ok:
        raise StabilityError(
            "contraction hypotheses fail; see report", report)
    lam = contraction_lambda(report)
    if lam is None:
        raise StabilityError(
            "strict angular condition fails; refine the direction grid",
            report)
    rho = rho_bound(problem.medium, problem.dt, lam)

    if initial is not None:
        if initial.values.shape != problem.grid.shape:
            raise ConfigError(
                f"warm start has shape {initial.values.shape}, "
                f"grid needs {problem.grid.shape}")
        fld = Field(problem.grid, initial.values.astype(float).copy(), 0,
                    problem.norm_mask)
        fld.values[problem.inflow.index] = problem.inflow_values(0.0)
    else:
        fld = problem.zero_field()

    q_fixed = problem.q_interior(0.0)

    residuals = []
    converged = False
    if max_iters is None:
        max_iters = 2_000_000
    for it in range(1, max_iters + 1):
        new = problem.advance(fld, q_fixed)
        res = float(np.max(np.abs(new.values - fld.values))) \
            if new.values.size else 0.0
        residuals.append(res)
        fld = new
        if res <= tol:
            converged = True
            break

    res_arr = np.asarray(residuals)
    final_res = res_arr[-1] if res_arr.size else 0.0
    error_bound = final_res * rho / (1.0 - rho)
    fld = Field(problem.grid, fld.values, len(residuals), problem.norm_mask)
    return SteadyResult(field=fld, iterations=len(residuals),
                        converged=converged, residuals=res_arr, rho=rho,
                        lam=lam, tol=tol, error_bound=error_bound,
                        report=report)


def steady_residual(problem, fld: Field) -> float:
    """Sup norm of the stationary equation residual at interior points."""
    from .operators import apply_A, apply_K, apply_Sigma
    ws = problem.workspace
    grid = problem.grid
    if grid.M1 < 2 or grid.M2 < 2:
        return 0.0
    vals = fld.values.copy()
    vals[problem.inflow.index] = problem.inflow_values(0.0)
    resid = (apply_A(vals, ws) - apply_Sigma(vals, ws) + apply_K(vals, ws))
    q = problem.q_interior(0.0)
    inner = resid[1:-1, 1:-1, :]
    if q is not None:
        inner = inner + q
    return float(np.max(np.abs(inner)))
