"""Discrete transport, removal, and scattering operators on 2D fields.

The transport part is first-order upwind, written in sign-split form: each
direction differences against its upwind neighbor only.  The equivalent
"central difference plus |xi| grid diffusion" algebra is not used here; the
identity between the two forms is enforced by test instead.

All operators act on full-storage value arrays and populate interior points
only; boundary rows of the output are zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .phasespace import Grid2D, InflowSet, Medium
from .phasefunc import PhaseFunction

FloatArray = NDArray[np.float64]


@dataclass
class Workspace2D:
    """Precomputed per-direction stencil weights and the scattering matrix.

    Weights are the nonnegative upwind coefficients
        w_im = (|xi1| + xi1) / (2 dx1)   on the (i-1, j) neighbor,
        w_ip = (|xi1| - xi1) / (2 dx1)   on the (i+1, j) neighbor,
    and likewise w_jm / w_jp in the second coordinate.  Exactly one of each
    pair is nonzero per direction (both vanish for tangential components),
    which is what keeps non-inflow boundary storage inert.

    ``smat[n, nu] = dtheta * p(theta_nu - theta_n)``; it is None for
    x-dependent kernels, which are evaluated per grid point on the fly.
    """

    grid: Grid2D
    medium: Medium
    phase: PhaseFunction
    w_im: FloatArray
    w_ip: FloatArray
    w_jm: FloatArray
    w_jp: FloatArray
    diag: FloatArray
    smat: Optional[FloatArray]
    coef0: FloatArray   # (M1-1, M2-1, M): 1 - c dt (|xi1|/dx1 + |xi2|/dx2)
    cdt: FloatArray     # (M1-1, M2-1, 1)
    denom: FloatArray   # (M1-1, M2-1, 1): 1 + c dt (mu_a + mu_s)
    mus_int: FloatArray  # (M1-1, M2-1, 1)


def build_workspace(grid: Grid2D, medium: Medium, phase: PhaseFunction,
                    inflow: Optional[InflowSet] = None) -> Workspace2D:
    if phase.dimension != 2:
        raise ValueError(f"need a 2D kernel, got dimension {phase.dimension}")
    xi1 = grid.xi[:, 0]
    xi2 = grid.xi[:, 1]
    w_im = (np.abs(xi1) + xi1) / (2.0 * grid.dx1)
    w_ip = (np.abs(xi1) - xi1) / (2.0 * grid.dx1)
    w_jm = (np.abs(xi2) + xi2) / (2.0 * grid.dx2)
    w_jp = (np.abs(xi2) - xi2) / (2.0 * grid.dx2)
    diag = np.abs(xi1) / grid.dx1 + np.abs(xi2) / grid.dx2

    if phase.x_dependent:
        smat = None
    else:
        alpha = grid.theta[None, :] - grid.theta[:, None]
        smat = grid.dtheta * phase.eval(alpha)

    c_int = medium.c[1:-1, 1:-1]
    coef0 = 1.0 - c_int[:, :, None] * grid.dt * diag[None, None, :]
    cdt = (c_int * grid.dt)[:, :, None]
    denom = 1.0 + cdt * medium.removal[1:-1, 1:-1, None]
    mus_int = medium.mu_s[1:-1, 1:-1, None]

    ws = Workspace2D(grid, medium, phase, w_im, w_ip, w_jm, w_jp, diag, smat,
                     coef0, cdt, denom, mus_int)
    if inflow is not None:
        _verify_stencil_coverage(ws, inflow)
    return ws


def _verify_stencil_coverage(ws: Workspace2D, inflow: InflowSet) -> None:
    """Assert every positive-weight boundary read lands on an inflow entry.

    This is a structural property of the upwind weights and the inflow
    classification; a failure means internal bookkeeping is broken.
    """
    grid = ws.grid
    if grid.M1 < 2 or grid.M2 < 2:
        return
    mask = inflow.mask
    checks = (
        (ws.w_im, mask[0, 1:-1, :], "x1=0"),
        (ws.w_ip, mask[-1, 1:-1, :], "x1=L1"),
        (ws.w_jm, mask[1:-1, 0, :], "x2=0"),
        (ws.w_jp, mask[1:-1, -1, :], "x2=L2"),
    )
    for weights, face_mask, face in checks:
        reads = weights > 0
        if not np.all(face_mask[:, reads]):
            raise RuntimeError(
                f"internal invariant violation: upwind stencil reads "
                f"non-inflow boundary storage on face {face}")


def apply_A(values: FloatArray, ws: Workspace2D) -> FloatArray:
    """Sign-split upwind transport term -xi . grad, interior points only."""
    grid = ws.grid
    out = np.zeros_like(values)
    if grid.M1 < 2 or grid.M2 < 2:
        return out
    I = values
    for n in range(grid.M):
        xi1, xi2 = grid.xi[n]
        c = I[1:-1, 1:-1, n]
        a = np.zeros_like(c)
        if xi1 > 0:
            a = a - xi1 * (c - I[:-2, 1:-1, n]) / grid.dx1
        elif xi1 < 0:
            a = a - xi1 * (I[2:, 1:-1, n] - c) / grid.dx1
        if xi2 > 0:
            a = a - xi2 * (c - I[1:-1, :-2, n]) / grid.dx2
        elif xi2 < 0:
            a = a - xi2 * (I[1:-1, 2:, n] - c) / grid.dx2
        out[1:-1, 1:-1, n] = a
    return out


def apply_B(values: FloatArray, ws: Workspace2D) -> FloatArray:
    """Neighbor part of the upwind operator: nonnegative weights only."""
    grid = ws.grid
    out = np.zeros_like(values)
    if grid.M1 < 2 or grid.M2 < 2:
        return out
    I = values
    out[1:-1, 1:-1, :] = (ws.w_im * I[:-2, 1:-1, :] + ws.w_ip * I[2:, 1:-1, :]
                          + ws.w_jm * I[1:-1, :-2, :] + ws.w_jp * I[1:-1, 2:, :])
    return out


def scattering_product(intr: FloatArray, smat: FloatArray) -> FloatArray:
    """sum_nu smat[n, nu] * I[..., nu], accumulated in ascending nu.

    The fixed summation order makes results bit-for-bit reproducible
    regardless of thread count or BLAS build.
    """
    out = np.zeros_like(intr)
    tmp = np.empty_like(intr)
    for nu in range(smat.shape[1]):
        np.multiply(intr[..., nu, None], smat[:, nu], out=tmp)
        out += tmp
    return out


def apply_K(values: FloatArray, ws: Workspace2D) -> FloatArray:
    """Scattering gain mu_s * dtheta * sum_nu p(theta_nu - theta_n) I_nu."""
    grid = ws.grid
    out = np.zeros_like(values)
    if grid.M1 < 2 or grid.M2 < 2:
        return out
    intr = values[1:-1, 1:-1, :]
    if ws.smat is not None:
        out[1:-1, 1:-1, :] = ws.mus_int * scattering_product(intr, ws.smat)
        return out

    # x-dependent kernel: build one row matrix per interior point
    pf = ws.phase
    alpha = grid.theta[None, :] - grid.theta[:, None]
    for ii in range(1, grid.M1):
        for jj in range(1, grid.M2):
            s = grid.dtheta * np.asarray(
                pf.eval_x(alpha, grid.x1[ii], grid.x2[jj]), dtype=float)
            acc = np.zeros(grid.M)
            for nu in range(grid.M):
                acc += s[:, nu] * values[ii, jj, nu]
            out[ii, jj, :] = ws.medium.mu_s[ii, jj] * acc
    return out


def apply_Sigma(values: FloatArray, ws: Workspace2D) -> FloatArray:
    """Pointwise removal (mu_a + mu_s) * I, interior points only."""
    grid = ws.grid
    out = np.zeros_like(values)
    if grid.M1 < 2 or grid.M2 < 2:
        return out
    out[1:-1, 1:-1, :] = ws.medium.removal[1:-1, 1:-1, None] * values[1:-1, 1:-1, :]
    return out


def operator_row_norm(ws: Workspace2D) -> float:
    """Max absolute row sum of A - Sigma + K over interior unknowns."""
    grid = ws.grid
    removal_max = float(np.max(ws.medium.removal))
    mus_max = float(np.max(ws.medium.mu_s))
    if ws.smat is not None:
        row_mass = float(np.max(np.sum(np.abs(ws.smat), axis=1)))
    else:
        row_mass = ws.phase.sup_bound * grid.dtheta * grid.M
    return float(2.0 * np.max(ws.diag) + removal_max + mus_max * row_mass)
