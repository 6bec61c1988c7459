"""Verification tools: quadrature error helpers, manufactured solutions,
refinement studies, and a dense direct solve for small stationary systems.

The angular study deliberately uses a kernel whose Fourier coefficients
decay only algebraically; analytic kernels alias so fast that the measured
rate collapses into the round-off floor before a slope can be fitted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .phasefunc import PhaseFunction
from .phasespace import (Field, FloatArray, Grid2D, build_grid2d, build_medium,
                         sup_norm)
from .transient import Problem2D, make_problem_2d, run_transient
from .stationary import solve_stationary

_MODE_CHUNK = 4096
_ALPHA_CHUNK = 512


def periodic_trapezoid(f: Callable[[FloatArray], FloatArray], M: int) -> float:
    """Equispaced quadrature of a 2pi-periodic function with M nodes."""
    if M < 1:
        raise ValueError("need at least one node")
    dtheta = 2.0 * np.pi / M
    theta = dtheta * np.arange(M)
    return float(dtheta * np.sum(np.asarray(f(theta), dtype=float)))


def trapezoid_error_bound(d2_sup: float, M: int) -> float:
    """|integral - quadrature| <= (pi/12) * sup|f''| * dtheta^2."""
    dtheta = 2.0 * np.pi / M
    return (np.pi / 12.0) * d2_sup * dtheta * dtheta


def algebraic_decay_kernel(power: int = 2, nmax: int = 20000) -> PhaseFunction:
    """Normalized even kernel with cosine coefficients (1 + m^2)^(-power).

    Twice continuously differentiable for power >= 2 but not analytic, so
    quadrature errors shrink like M^(2 - 2*power) instead of geometrically.
    Carries exact sup and second-derivative bounds (closed forms for
    power == 2, tail-padded partial sums otherwise) and no geometric decay
    envelope, which forces stability checks through the smoothness route.
    Series truncation at nmax leaves a tail below 5e-14 for power == 2.
    """
    if power < 2:
        raise ValueError("power < 2 gives a kernel without two derivatives")
    m = np.arange(1, nmax + 1, dtype=float)
    tau = (1.0 + m * m) ** (-float(power))

    def p(alpha):
        alpha = np.asarray(alpha, dtype=float)
        flat = np.ravel(alpha)
        out = np.full(flat.shape, 0.5)
        for a0 in range(0, flat.size, _ALPHA_CHUNK):
            blk = flat[a0:a0 + _ALPHA_CHUNK]
            acc = np.zeros(blk.shape)
            for m0 in range(0, nmax, _MODE_CHUNK):
                mm = m[m0:m0 + _MODE_CHUNK]
                acc += np.cos(np.outer(blk, mm)) @ tau[m0:m0 + _MODE_CHUNK]
            out[a0:a0 + _ALPHA_CHUNK] += acc
        return (out / np.pi).reshape(alpha.shape)

    if power == 2:
        # sum 1/(1+m^2) and 1/(1+m^2)^2 in closed form
        s1 = (np.pi / np.tanh(np.pi) - 1.0) / 2.0
        s2 = (-0.5 + (np.pi / 4.0) / np.tanh(np.pi)
              + (np.pi ** 2 / 4.0) / np.sinh(np.pi) ** 2)
        sup = (1.0 + 2.0 * s2) / (2.0 * np.pi)
        d2 = (s1 - s2) / np.pi
    else:
        tail_sup = nmax ** (1 - 2 * power) / (2 * power - 1)
        tail_d2 = nmax ** (3 - 2 * power) / (2 * power - 3)
        sup = (1.0 + 2.0 * (np.sum(tau) + tail_sup)) / (2.0 * np.pi)
        d2 = (np.sum(m * m * tau) + tail_d2) / np.pi

    def factor(modes):
        modes = np.abs(np.asarray(modes))
        return (1.0 + modes.astype(float) ** 2) ** (-float(power))

    return PhaseFunction(
        dimension=2,
        label=f"algebraic_decay(power={power})",
        eval=p,
        sup_bound=float(sup),
        d2_bound=float(d2),
        analytic_decay=None,
        fourier_factor=factor,
    )


@dataclass
class ManufacturedSolution2D:
    """Exact solution plus the source that makes it satisfy the equation."""

    phase: PhaseFunction
    c: float
    mu_a: float
    mu_s: float
    I: Callable
    q: Callable
    label: str = ""

    def initial(self) -> Callable:
        I = self.I
        return lambda x1, x2, theta: I(0.0, x1, x2, theta)

    def boundary(self) -> Callable:
        I = self.I
        return lambda t, x1, x2, theta: I(t, x1, x2, theta)

    def problem(self, grid: Grid2D) -> Problem2D:
        medium = build_medium(grid, c=self.c, mu_a=self.mu_a, mu_s=self.mu_s)
        return make_problem_2d(grid, medium, self.phase, q=self.q,
                               I0=self.initial(), I1=self.boundary())

    def exact_values(self, grid: Grid2D, t: float) -> FloatArray:
        X1, X2, TH = grid.full_coords()
        return np.ascontiguousarray(np.broadcast_to(
            np.asarray(self.I(t, X1, X2, TH), dtype=float), grid.shape))


def separable_solution(phase: PhaseFunction, modes: Sequence[tuple],
                       *, c: float, mu_a: float, mu_s: float,
                       time_fn: Callable, dtime_fn: Callable,
                       space_fn: Callable, dspace1_fn: Callable,
                       dspace2_fn: Callable,
                       label: str = "") -> ManufacturedSolution2D:
    """Build I = a(t) X(x) Theta(theta) with Theta a finite cosine/sine sum.

    The kernel must expose convolution eigenvalues (``fourier_factor``);
    they turn the scattering integral into an exact mode-by-mode rescale,
    so the manufactured source has no quadrature error of its own.
    """
    if phase.fourier_factor is None:
        raise ConfigError("kernel lacks convolution eigenvalues; "
                          "cannot build an exact scattering image")
    modes = [(int(mm), float(am), float(bm)) for mm, am, bm in modes]
    factors = {mm: float(phase.fourier_factor(np.asarray(mm))) for mm, _, _ in modes}

    def theta_sum(TH):
        TH = np.asarray(TH, dtype=float)
        out = np.zeros(TH.shape)
        for mm, am, bm in modes:
            out += am * np.cos(mm * TH) + bm * np.sin(mm * TH)
        return out

    def theta_scattered(TH):
        TH = np.asarray(TH, dtype=float)
        out = np.zeros(TH.shape)
        for mm, am, bm in modes:
            out += factors[mm] * (am * np.cos(mm * TH) + bm * np.sin(mm * TH))
        return out

    def I(t, X1, X2, TH):
        return time_fn(t) * space_fn(X1, X2) * theta_sum(TH)

    def q(t, X1, X2, TH):
        a = time_fn(t)
        da = dtime_fn(t)
        X = space_fn(X1, X2)
        th = theta_sum(TH)
        sth = theta_scattered(TH)
        xi1, xi2 = np.cos(TH), np.sin(TH)
        transport = a * (xi1 * dspace1_fn(X1, X2) + xi2 * dspace2_fn(X1, X2)) * th
        return (da / c) * X * th + transport \
            + (mu_a + mu_s) * a * X * th - mu_s * a * X * sth

    return ManufacturedSolution2D(phase=phase, c=c, mu_a=mu_a, mu_s=mu_s,
                                  I=I, q=q, label=label)


def polynomial_bump_mms(phase: PhaseFunction, L: float, *, c: float = 1.0,
                        mu_a: float = 0.3, mu_s: float = 0.5,
                        modes: Optional[Sequence[tuple]] = None
                        ) -> ManufacturedSolution2D:
    """Smooth manufactured solution vanishing on the spatial boundary."""
    if modes is None:
        modes = [(0, 1.0, 0.0), (1, 0.6, 0.3), (2, 0.2, 0.1)]
    L = float(L)

    def X(x1, x2):
        return 16.0 * x1 * (L - x1) * x2 * (L - x2) / L ** 4

    def dX1(x1, x2):
        return 16.0 * (L - 2.0 * x1) * x2 * (L - x2) / L ** 4

    def dX2(x1, x2):
        return 16.0 * x1 * (L - x1) * (L - 2.0 * x2) / L ** 4

    return separable_solution(
        phase, modes, c=c, mu_a=mu_a, mu_s=mu_s,
        time_fn=lambda t: 1.0 + 0.5 * math.sin(t),
        dtime_fn=lambda t: 0.5 * math.cos(t),
        space_fn=X, dspace1_fn=dX1, dspace2_fn=dX2,
        label="polynomial bump")


def solution_error(problem: Problem2D, exact: FloatArray, fld: Field) -> float:
    """Sup-norm error over interior and inflow points."""
    mask = problem.norm_mask
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(fld.values[mask] - exact[mask])))


@dataclass
class ConvergenceStudy:
    refine: str
    params: list
    hs: FloatArray
    errors: FloatArray
    orders: FloatArray          # pairwise log2(e_l / e_{l+1}) per halving
    fitted_order: float         # least-squares slope over the last levels
    monotone: bool
    notes: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "refine": self.refine,
            "levels": [dict(p, h=h, error=e) for p, h, e in
                       zip(self.params, self.hs, self.errors)],
            "orders": list(self.orders),
            "fitted_order": self.fitted_order,
            "monotone": self.monotone,
            "notes": list(self.notes),
        }

    def write_csv(self, path) -> None:
        keys = sorted({k for p in self.params for k in p})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level"] + keys + ["h", "error", "order"])
            for lvl, (p, h, e) in enumerate(zip(self.params, self.hs,
                                                self.errors)):
                order = "" if lvl == 0 else f"{self.orders[lvl - 1]:.17g}"
                w.writerow([lvl] + [p.get(k, "") for k in keys]
                           + [f"{h:.17g}", f"{e:.17g}", order])


def fit_order(hs: Sequence[float], errors: Sequence[float],
              last: int = 3) -> float:
    """Least-squares slope of log(error) against log(h), finest levels."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    n = min(last, hs.size)
    if n < 2:
        raise ValueError("need at least two levels to fit an order")
    if np.any(errors[-n:] <= 0.0):
        raise ValueError("zero or negative errors; nothing to fit")
    return float(np.polyfit(np.log(hs[-n:]), np.log(errors[-n:]), 1)[0])


def spacetime_study(mms: ManufacturedSolution2D, *, L1: float, L2: float,
                    M1: int, M2: int, M: int, dt: float, T: float,
                    n_levels: int = 3) -> ConvergenceStudy:
    """Halve dt and both mesh widths together; direction count stays fixed.

    First order in time and space, so errors should halve per level.  The
    direction grid is deliberately fine enough (band-limited solution) that
    the frozen angular error sits far below the floor being measured.
    """
    params, hs, errors = [], [], []
    for lvl in range(n_levels):
        f = 2 ** lvl
        grid = build_grid2d(L1=L1, L2=L2, M1=M1 * f, M2=M2 * f, M=M,
                            dt=dt / f, T=T)
        problem = mms.problem(grid)
        result = run_transient(problem)
        exact = mms.exact_values(grid, grid.T)
        err = solution_error(problem, exact, result.final)
        params.append({"M1": grid.M1, "M2": grid.M2, "M": M, "dt": grid.dt})
        hs.append(grid.dt)
        errors.append(err)

    hs = np.asarray(hs)
    errors = np.asarray(errors)
    orders = np.log2(errors[:-1] / errors[1:])
    study = ConvergenceStudy(
        refine="spacetime", params=params, hs=hs, errors=errors,
        orders=orders, fitted_order=fit_order(hs, errors),
        monotone=bool(np.all(np.diff(errors) < 0.0)))
    if not study.monotone:
        study.notes.append("errors are not monotone; treat the fit with care")
    return study


def angular_study(phase: PhaseFunction, Ms: Sequence[int], *,
                  modes: Optional[Sequence[tuple]] = None,
                  mu_a: float = 1.0, mu_s: float = 1.0, c: float = 1.0,
                  tol: float = 1e-13) -> ConvergenceStudy:
    """Refine directions only, against an x-constant stationary solution.

    The exact solution depends on angle alone, so transport contributes
    nothing and the measured error is pure angular quadrature error.  Each
    level marches to the fixed point; the approach is geometric, so the
    iteration floor sits at the solver tolerance, far below the errors.
    """
    if phase.fourier_factor is None:
        raise ConfigError("kernel lacks convolution eigenvalues")
    if modes is None:
        modes = [(0, 1.0, 0.0), (1, 0.4, 0.2), (2, 0.15, 0.1)]
    modes = [(int(mm), float(am), float(bm)) for mm, am, bm in modes]
    mmax = max(mm for mm, _, _ in modes)

    def theta_sum(TH):
        TH = np.asarray(TH, dtype=float)
        out = np.zeros(TH.shape)
        for mm, am, bm in modes:
            out += am * np.cos(mm * TH) + bm * np.sin(mm * TH)
        return out

    def theta_scattered(TH):
        TH = np.asarray(TH, dtype=float)
        out = np.zeros(TH.shape)
        for mm, am, bm in modes:
            fac = float(phase.fourier_factor(np.asarray(mm)))
            out += fac * (am * np.cos(mm * TH) + bm * np.sin(mm * TH))
        return out

    params, hs, errors = [], [], []
    for M in Ms:
        if M <= 2 * mmax:
            raise ValueError(f"M={M} cannot resolve mode {mmax}")
        grid = build_grid2d(L1=2.0, L2=2.0, M1=2, M2=2, M=M, dt=0.5, T=0.5)
        medium = build_medium(grid, c=c, mu_a=mu_a, mu_s=mu_s)

        def q(x1, x2, theta):
            return (mu_a + mu_s) * theta_sum(theta) \
                - mu_s * theta_scattered(theta)

        def I1(x1, x2, theta):
            return theta_sum(theta)

        problem = make_problem_2d(grid, medium, phase, q=q, I1=I1)
        result = solve_stationary(problem, tol=tol)
        exact = np.ascontiguousarray(np.broadcast_to(
            theta_sum(grid.theta)[None, None, :], grid.shape))
        err = solution_error(problem, exact, result.field)
        params.append({"M": M, "iterations": result.iterations})
        hs.append(grid.dtheta)
        errors.append(err)

    hs = np.asarray(hs)
    errors = np.asarray(errors)
    orders = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    study = ConvergenceStudy(
        refine="angular", params=params, hs=hs, errors=errors, orders=orders,
        fitted_order=fit_order(hs, errors),
        monotone=bool(np.all(np.diff(errors) < 0.0)))
    if not study.monotone:
        study.notes.append("errors are not monotone; treat the fit with care")
    return study


def assemble_dense_system(problem: Problem2D, cap: int = 400):
    """Dense matrix form of the stationary interior system.

    Unknowns are interior (i, j, n) in lexicographic order.  Boundary reads
    move to the right-hand side with their inflow values.  Guarded by an
    unknown-count cap; this exists to cross-check the iteration, not to
    solve anything of size.
    """
    grid = problem.grid
    ws = problem.workspace
    ni, nj, M = grid.M1 - 1, grid.M2 - 1, grid.M
    if ni < 1 or nj < 1:
        raise ValueError("grid has no interior points")
    n_unknowns = ni * nj * M
    if n_unknowns > cap:
        raise ValueError(f"{n_unknowns} unknowns exceed the dense cap {cap}")
    if not (problem.q_steady and problem.i1_steady):
        raise ConfigError("dense solve needs time-independent data")

    bvals = np.zeros(grid.shape)
    bvals[problem.inflow.index] = problem.inflow_values(0.0)
    q = problem.q_interior(0.0)
    removal = problem.medium.removal
    mus = problem.medium.mu_s

    if ws.smat is not None:
        def srow(i, j):
            return ws.smat
    else:
        alpha = grid.theta[None, :] - grid.theta[:, None]

        def srow(i, j):
            return grid.dtheta * np.asarray(
                problem.phase.eval_x(alpha, grid.x1[i], grid.x2[j]),
                dtype=float)

    def idx(i, j, n):
        return ((i - 1) * nj + (j - 1)) * M + n

    A = np.zeros((n_unknowns, n_unknowns))
    b = np.zeros(n_unknowns)
    neighbor_weights = (
        (ws.w_im, -1, 0), (ws.w_ip, 1, 0), (ws.w_jm, 0, -1), (ws.w_jp, 0, 1))
    for i in range(1, grid.M1):
        for j in range(1, grid.M2):
            smat_ij = srow(i, j)
            for n in range(M):
                row = idx(i, j, n)
                A[row, row] += ws.diag[n] + removal[i, j]
                A[row, idx(i, j, 0):idx(i, j, 0) + M] -= mus[i, j] * smat_ij[n, :]
                for w_arr, di, dj in neighbor_weights:
                    w = w_arr[n]
                    if w == 0.0:
                        continue
                    ii, jj = i + di, j + dj
                    if 1 <= ii <= grid.M1 - 1 and 1 <= jj <= grid.M2 - 1:
                        A[row, idx(ii, jj, n)] -= w
                    else:
                        b[row] += w * bvals[ii, jj, n]
                if q is not None:
                    b[row] += q[i - 1, j - 1, n]
    return A, b


def dense_stationary_solve(problem: Problem2D, cap: int = 400) -> Field:
    A, b = assemble_dense_system(problem, cap=cap)
    x = np.linalg.solve(A, b)
    grid = problem.grid
    values = np.zeros(grid.shape)
    values[1:-1, 1:-1, :] = x.reshape(grid.M1 - 1, grid.M2 - 1, grid.M)
    values[problem.inflow.index] = problem.inflow_values(0.0)
    return Field(grid, values, 0, problem.norm_mask)
