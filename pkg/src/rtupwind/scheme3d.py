"""Explicit scheme on a box with latitude-longitude directions.

The direction table deduplicates the poles: index 0 is +e3, the last index
is -e3, and interior rows run over (theta_m, phi_n) with m = 1..Mtheta-1.
Pole directions carry quadrature weight zero, so they transport and decay
but gain nothing from scattering and contribute nothing to it; this matches
the sin(theta) factor in the spherical sum.

The angular stability condition mixes second derivatives in both sphere
coordinates.  Its supremum is taken over outgoing directions as well, which
we approximate by sweeping a quarter circle of representative directions;
by symmetry of the kernel (a function of the angle between directions
only), that sweep covers the full sphere of outgoing directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigError
from .operators import scattering_product
from .phasefunc import ConditionResult, PhaseFunction, _INAPPLICABLE
from .phasespace import (Field, FloatArray, Grid3D, InflowSet, Medium,
                         classify_inflow, make_norm_mask)
from .transient import (StabilityReport, _arity, _require_finite)

_SUP_SAMPLES = 512
_SUP_SAFETY = 1.01
_BETA_SWEEP = 33


@dataclass
class Workspace3D:
    grid: Grid3D
    medium: Medium
    phase: PhaseFunction
    w_im: FloatArray
    w_ip: FloatArray
    w_jm: FloatArray
    w_jp: FloatArray
    w_lm: FloatArray
    w_lp: FloatArray
    diag: FloatArray
    smat: Optional[FloatArray]
    coef0: FloatArray
    cdt: FloatArray
    denom: FloatArray
    mus_int: FloatArray


def scattering_matrix_3d(grid: Grid3D, phase: PhaseFunction) -> FloatArray:
    """smat[d, d'] = weight[d'] * p(angle between xi_d and xi_d')."""
    dots = np.clip(grid.xi @ grid.xi.T, -1.0, 1.0)
    return phase.eval(np.arccos(dots)) * grid.weight[None, :]


def build_workspace_3d(grid: Grid3D, medium: Medium, phase: PhaseFunction,
                       inflow: Optional[InflowSet] = None) -> Workspace3D:
    if phase.dimension != 3:
        raise ValueError(f"need a 3D kernel, got dimension {phase.dimension}")
    if phase.x_dependent:
        raise ConfigError("x-dependent kernels are supported on the square "
                          "only")
    xi1, xi2, xi3 = grid.xi[:, 0], grid.xi[:, 1], grid.xi[:, 2]
    w_im = (np.abs(xi1) + xi1) / (2.0 * grid.dx1)
    w_ip = (np.abs(xi1) - xi1) / (2.0 * grid.dx1)
    w_jm = (np.abs(xi2) + xi2) / (2.0 * grid.dx2)
    w_jp = (np.abs(xi2) - xi2) / (2.0 * grid.dx2)
    w_lm = (np.abs(xi3) + xi3) / (2.0 * grid.dx3)
    w_lp = (np.abs(xi3) - xi3) / (2.0 * grid.dx3)
    diag = (np.abs(xi1) / grid.dx1 + np.abs(xi2) / grid.dx2
            + np.abs(xi3) / grid.dx3)
    smat = scattering_matrix_3d(grid, phase)

    c_int = medium.c[1:-1, 1:-1, 1:-1]
    coef0 = 1.0 - c_int[..., None] * grid.dt * diag
    cdt = (c_int * grid.dt)[..., None]
    denom = 1.0 + cdt * medium.removal[1:-1, 1:-1, 1:-1, None]
    mus_int = medium.mu_s[1:-1, 1:-1, 1:-1, None]

    ws = Workspace3D(grid, medium, phase, w_im, w_ip, w_jm, w_jp, w_lm, w_lp,
                     diag, smat, coef0, cdt, denom, mus_int)
    if inflow is not None:
        _verify_stencil_coverage_3d(ws, inflow)
    return ws


def _verify_stencil_coverage_3d(ws: Workspace3D, inflow: InflowSet) -> None:
    grid = ws.grid
    if min(grid.M1, grid.M2, grid.M3) < 2:
        return
    mask = inflow.mask
    s = slice(1, -1)
    checks = (
        (ws.w_im, mask[0, s, s, :], "x1=0"),
        (ws.w_ip, mask[-1, s, s, :], "x1=L1"),
        (ws.w_jm, mask[s, 0, s, :], "x2=0"),
        (ws.w_jp, mask[s, -1, s, :], "x2=L2"),
        (ws.w_lm, mask[s, s, 0, :], "x3=0"),
        (ws.w_lp, mask[s, s, -1, :], "x3=L3"),
    )
    for weights, face_mask, face in checks:
        reads = weights > 0
        if not np.all(face_mask[..., reads]):
            raise RuntimeError(
                f"internal invariant violation: upwind stencil reads "
                f"non-inflow boundary storage on face {face}")


def spherical_row_sum(phase: PhaseFunction, grid: Grid3D, d: int) -> float:
    """Quadrature mass of the kernel row for direction d."""
    smat = scattering_matrix_3d(grid, phase)
    return float(np.sum(smat[d, :]))


def _angular_condition_3d(phase: PhaseFunction, grid: Grid3D,
                          mu_star: float) -> ConditionResult:
    """Mixed second-derivative condition for the latitude-longitude sum.

    lhs = dtheta^2 * sup|d^2/dtheta'^2 (p sin)| + dphi^2/2 * sup|d^2/dphi'^2 p * sin|
    bound = (6 / pi^2) * mu_star
    """
    if phase.du is None or phase.d2u is None:
        return ConditionResult(kind="theta_phi_c2",
                               note="kernel derivatives unavailable",
                               **_INAPPLICABLE)
    th = np.linspace(0.0, np.pi, _SUP_SAMPLES)
    ph = np.linspace(0.0, 2.0 * np.pi, _SUP_SAMPLES)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    sin_t, cos_t = np.sin(TH), np.cos(TH)
    sup_theta = 0.0
    sup_phi = 0.0
    for beta in np.linspace(0.0, np.pi / 2.0, _BETA_SWEEP):
        sb, cb = np.sin(beta), np.cos(beta)
        u = sb * sin_t * np.cos(PH) + cb * cos_t
        u = np.clip(u, -1.0, 1.0)
        u_t = sb * cos_t * np.cos(PH) - cb * sin_t
        u_p = -sb * sin_t * np.sin(PH)
        u_pp = -(u - cb * cos_t)
        g = phase.eval(np.arccos(u))
        g_u = phase.du(u)
        g_uu = phase.d2u(u)
        g_t = g_u * u_t
        g_tt = g_uu * u_t * u_t - g_u * u       # u_theta_theta = -u
        g_pp = g_uu * u_p * u_p + g_u * u_pp
        term_t = np.abs(g_tt * sin_t + 2.0 * g_t * cos_t - g * sin_t)
        term_p = np.abs(g_pp * sin_t)
        sup_theta = max(sup_theta, float(np.max(term_t)))
        sup_phi = max(sup_phi, float(np.max(term_p)))
    sup_theta *= _SUP_SAFETY
    sup_phi *= _SUP_SAFETY

    lhs = grid.dtheta ** 2 * sup_theta + 0.5 * grid.dphi ** 2 * sup_phi
    if np.isinf(mu_star):
        bound = np.inf
        passes = True
        strict = True
        margin = np.inf
    else:
        bound = 6.0 / np.pi ** 2 * mu_star
        passes = bool(lhs <= bound)
        strict = bool(lhs < bound)
        margin = bound - lhs
    note = (f"sup_theta={sup_theta:.6g}, sup_phi={sup_phi:.6g}, "
            f"swept {_BETA_SWEEP} outgoing directions")
    return ConditionResult(kind="theta_phi_c2", applicable=True,
                           passes=passes, passes_strict=strict, lhs=float(lhs),
                           bound=float(bound), margin=float(margin), note=note)


def check_stability_3d(grid: Grid3D, medium: Medium,
                       phase: PhaseFunction) -> StabilityReport:
    cfl_lhs = medium.c_plus * grid.dt * (1.0 / grid.dx1 + 1.0 / grid.dx2
                                         + 1.0 / grid.dx3)
    cfl_pass = bool(cfl_lhs <= 1.0)
    cond = _angular_condition_3d(phase, grid, medium.mu_star)
    analytic = ConditionResult(kind="analytic_decay",
                               note="decay route applies on the square only",
                               **_INAPPLICABLE)
    theta_pass = bool(cond.applicable and cond.passes)
    theta_strict = bool(cond.applicable and cond.passes_strict)

    notes = []
    if not cfl_pass:
        notes.append(f"time-step condition fails: {cfl_lhs:.6g} > 1")
    if not theta_pass:
        notes.append("angular condition fails; refine the direction grid")
    overall = cfl_pass and theta_pass
    stationary_ok = (cfl_pass and theta_strict and medium.c_mua_minus > 0.0)
    return StabilityReport(
        dimension=3, dt=grid.dt, cfl_lhs=float(cfl_lhs), cfl_pass=cfl_pass,
        c2=cond, analytic=analytic, theta_pass=theta_pass,
        theta_pass_strict=theta_strict, sup_lhs=0.0, sup_pass=True,
        c_mua_minus=medium.c_mua_minus, mu_star=medium.mu_star,
        c_plus=medium.c_plus, overall_pass=overall,
        stationary_ok=stationary_ok, notes=notes)


def _coerce_interior_source_3d(q: Any, grid: Grid3D):
    if q is None:
        return (lambda t: None), True
    X1, X2, X3, TH, PH = grid.full_coords()
    x1i = X1[1:-1, :, :, :]
    x2i = X2[:, 1:-1, :, :]
    x3i = X3[:, :, 1:-1, :]
    shape = (max(grid.M1 - 1, 0), max(grid.M2 - 1, 0), max(grid.M3 - 1, 0),
             grid.n_dir)
    if isinstance(q, (int, float)):
        if not np.isfinite(q):
            raise ConfigError("interior source must be finite")
        arr = np.full(shape, float(q))
        return (lambda t: arr), True
    if callable(q):
        n = _arity(q)
        if n == 5:
            arr = np.ascontiguousarray(np.broadcast_to(
                np.asarray(q(x1i, x2i, x3i, TH, PH), dtype=float), shape))
            _require_finite(arr, "interior source")
            return (lambda t: arr), True
        if n == 6:
            def sample(t: float) -> FloatArray:
                arr = np.ascontiguousarray(np.broadcast_to(
                    np.asarray(q(t, x1i, x2i, x3i, TH, PH), dtype=float),
                    shape))
                _require_finite(arr, f"interior source at t={t}")
                return arr
            return sample, False
        raise ConfigError("interior source callable must take "
                          "(x1, x2, x3, theta, phi) with optional leading t")
    raise ConfigError(f"unsupported interior source spec: {type(q).__name__}")


def _coerce_inflow_source_3d(I1: Any, inflow: InflowSet):
    from .transient import _coerce_inflow_source
    return _coerce_inflow_source(I1, inflow)


@dataclass
class Problem3D:
    grid: Grid3D
    medium: Medium
    phase: PhaseFunction
    inflow: InflowSet
    workspace: Workspace3D
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
        return check_stability_3d(self.grid, self.medium, self.phase)

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
        ws = self.workspace
        grid = self.grid
        I = fld.values
        new = np.zeros_like(I)
        if min(grid.M1, grid.M2, grid.M3) >= 2:
            s = slice(1, -1)
            intr = I[s, s, s, :]
            rhs = ws.coef0 * intr
            rhs += ws.cdt * (ws.w_im * I[:-2, s, s, :] + ws.w_ip * I[2:, s, s, :]
                             + ws.w_jm * I[s, :-2, s, :] + ws.w_jp * I[s, 2:, s, :]
                             + ws.w_lm * I[s, s, :-2, :] + ws.w_lp * I[s, s, 2:, :])
            rhs += ws.cdt * (ws.mus_int * scattering_product(intr, ws.smat))
            if q_now is not None:
                rhs += ws.cdt * q_now
            new[s, s, s, :] = rhs / ws.denom
        t_next = (fld.k + 1) * grid.dt
        new[self.inflow.index] = self.i1_fn(t_next)
        return Field(grid, new, fld.k + 1, self.norm_mask)


def make_problem_3d(grid: Grid3D, medium: Medium, phase: PhaseFunction,
                    q: Any = None, I0: Any = None, I1: Any = None) -> Problem3D:
    inflow = classify_inflow(grid)
    ws = build_workspace_3d(grid, medium, phase, inflow)
    norm_mask = make_norm_mask(grid, inflow)
    q_fn, q_steady = _coerce_interior_source_3d(q, grid)
    i1_fn, i1_steady = _coerce_inflow_source_3d(I1, inflow)

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
        if min(grid.M1, grid.M2, grid.M3) >= 2:
            i0_values[1:-1, 1:-1, 1:-1, :] = float(I0)
    elif callable(I0):
        if _arity(I0) != 5:
            raise ConfigError(
                "initial-value callable must take (x1, x2, x3, theta, phi)")
        if min(grid.M1, grid.M2, grid.M3) >= 2:
            X1, X2, X3, TH, PH = grid.full_coords()
            vals = np.asarray(
                I0(X1[1:-1, :, :, :], X2[:, 1:-1, :, :], X3[:, :, 1:-1, :],
                   TH, PH), dtype=float)
            i0_values[1:-1, 1:-1, 1:-1, :] = np.broadcast_to(
                vals, i0_values[1:-1, 1:-1, 1:-1, :].shape)
            _require_finite(i0_values, "initial values")
    else:
        raise ConfigError(f"unsupported initial-value spec: {type(I0).__name__}")

    return Problem3D(grid, medium, phase, inflow, ws, norm_mask,
                     q_fn, q_steady, i1_fn, i1_steady, i0_values)


def integrated_intensity_3d(fld: Field) -> FloatArray:
    """Quadrature-weighted sum over directions (poles carry zero weight)."""
    grid = fld.grid
    if grid.dimension != 3:
        raise ValueError("expected a 3D field")
    return np.sum(fld.values * grid.weight, axis=-1)
