"""Phase-space grids, media, fields, and inflow-boundary bookkeeping.

The solver works on a tensor-product grid over a rectangle (or box) crossed
with a uniform family of unit directions.  Storage exists for every grid
point including the boundary, but only interior entries are unknowns and
only inflow entries (outward normal dot direction < 0) carry prescribed
values.  The remaining boundary slots are held at zero; upwind weights for
them are exact zeros, so they never influence an update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError

FloatArray = NDArray[np.float64]

# direction components this close to 0 or +-1 are snapped exactly, so that
# axis-aligned directions have exact zero tangential components
_SNAP = 1e-12


def _snap_components(v: FloatArray) -> FloatArray:
    v = np.where(np.abs(v) < _SNAP, 0.0, v)
    v = np.where(np.abs(v - 1.0) < _SNAP, 1.0, v)
    v = np.where(np.abs(v + 1.0) < _SNAP, -1.0, v)
    return v


def _require_positive(name: str, value) -> None:
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")


def _require_positive_int(name: str, value, minimum: int = 1) -> None:
    if int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


@dataclass(frozen=True)
class AngularQuadrature2D:
    """Uniform direction nodes on the unit circle with equal weights dtheta."""

    theta: FloatArray
    dtheta: float

    @property
    def weights(self) -> FloatArray:
        return np.full(self.theta.shape, self.dtheta)

    @property
    def total_weight(self) -> float:
        return self.theta.size * self.dtheta


@dataclass(frozen=True)
class AngularQuadrature3D:
    """Product latitude/longitude nodes with sin(theta) weights.

    Pole rows (sin(theta) = 0) are excluded from the node list; scattering
    sums run over interior latitudes only.
    """

    theta: FloatArray  # (Mtheta-1,), latitudes m=1..Mtheta-1
    phi: FloatArray    # (Mphi,)
    dtheta: float
    dphi: float

    @property
    def node_weights(self) -> FloatArray:
        # weight of node (m, n) is dtheta*dphi*sin(theta_m)
        return (self.dtheta * self.dphi) * np.sin(self.theta)[:, None] * np.ones_like(self.phi)[None, :]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.node_weights))


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangle grid crossed with M unit directions."""

    L1: float
    L2: float
    M1: int
    M2: int
    M: int
    dt: float
    T: float
    dx1: float
    dx2: float
    dtheta: float
    x1: FloatArray      # (M1+1,)
    x2: FloatArray      # (M2+1,)
    theta: FloatArray   # (M,)
    xi: FloatArray      # (M, 2)

    @property
    def dimension(self) -> int:
        return 2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.M1 + 1, self.M2 + 1, self.M)

    @property
    def n_interior(self) -> int:
        return max(self.M1 - 1, 0) * max(self.M2 - 1, 0) * self.M

    def quadrature(self) -> AngularQuadrature2D:
        return AngularQuadrature2D(self.theta, self.dtheta)

    def interior_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        if self.M1 >= 2 and self.M2 >= 2:
            mask[1:-1, 1:-1, :] = True
        return mask

    def node_mesh(self) -> tuple[FloatArray, FloatArray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def full_coords(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Broadcastable (x1, x2, theta) arrays covering all grid points."""
        return (
            self.x1[:, None, None],
            self.x2[None, :, None],
            self.theta[None, None, :],
        )


def build_grid2d(L1: float, L2: float, M1: int, M2: int, M: int,
                 dt: float, T: float) -> Grid2D:
    """Build a 2D phase-space grid.

    Spacings are dx_i = L_i / M_i and dtheta = 2*pi/M; directions are
    xi_n = (cos(n*dtheta), sin(n*dtheta)) with axis-aligned components
    snapped to exact 0/+-1.
    """
    _require_positive("L1", L1)
    _require_positive("L2", L2)
    _require_positive_int("M1", M1)
    _require_positive_int("M2", M2)
    _require_positive_int("M", M)
    _require_positive("dt", dt)
    _require_positive("T", T)
    if T < dt:
        raise ConfigError(f"T must be at least dt, got T={T!r}, dt={dt!r}")

    dx1 = L1 / M1
    dx2 = L2 / M2
    dtheta = 2.0 * np.pi / M
    theta = dtheta * np.arange(M)
    xi = np.stack([_snap_components(np.cos(theta)),
                   _snap_components(np.sin(theta))], axis=1)
    x1 = dx1 * np.arange(M1 + 1)
    x2 = dx2 * np.arange(M2 + 1)
    return Grid2D(float(L1), float(L2), int(M1), int(M2), int(M), float(dt),
                  float(T), dx1, dx2, dtheta, x1, x2, theta, xi)


@dataclass(frozen=True)
class Grid3D:
    """Uniform box grid crossed with latitude/longitude directions.

    The direction table deduplicates the poles: index 0 is +e3, index -1 is
    -e3, and indices 1..(Mtheta-1)*Mphi cover interior latitudes in
    (m, n) row-major order.  Pole directions carry zero quadrature weight.
    """

    L1: float
    L2: float
    L3: float
    M1: int
    M2: int
    M3: int
    Mtheta: int
    Mphi: int
    dt: float
    T: float
    dx1: float
    dx2: float
    dx3: float
    dtheta: float
    dphi: float
    x1: FloatArray
    x2: FloatArray
    x3: FloatArray
    xi: FloatArray          # (Ndir, 3)
    dir_theta: FloatArray   # (Ndir,)
    dir_phi: FloatArray     # (Ndir,), 0.0 at the poles
    weight: FloatArray      # (Ndir,) quadrature weight, 0 at the poles

    @property
    def dimension(self) -> int:
        return 3

    @property
    def n_dir(self) -> int:
        return self.xi.shape[0]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.M1 + 1, self.M2 + 1, self.M3 + 1, self.n_dir)

    @property
    def n_interior(self) -> int:
        return (max(self.M1 - 1, 0) * max(self.M2 - 1, 0)
                * max(self.M3 - 1, 0) * self.n_dir)

    def quadrature(self) -> AngularQuadrature3D:
        return AngularQuadrature3D(self.dtheta * np.arange(1, self.Mtheta),
                                   self.dphi * np.arange(self.Mphi),
                                   self.dtheta, self.dphi)

    def interior_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        if self.M1 >= 2 and self.M2 >= 2 and self.M3 >= 2:
            mask[1:-1, 1:-1, 1:-1, :] = True
        return mask

    def full_coords(self):
        return (
            self.x1[:, None, None, None],
            self.x2[None, :, None, None],
            self.x3[None, None, :, None],
            self.dir_theta[None, None, None, :],
            self.dir_phi[None, None, None, :],
        )


def build_grid3d(L1: float, L2: float, L3: float, M1: int, M2: int, M3: int,
                 Mtheta: int, Mphi: int, dt: float, T: float) -> Grid3D:
    """Build a 3D phase-space grid with dtheta = pi/Mtheta, dphi = 2*pi/Mphi."""
    for name, val in (("L1", L1), ("L2", L2), ("L3", L3), ("dt", dt), ("T", T)):
        _require_positive(name, val)
    for name, val in (("M1", M1), ("M2", M2), ("M3", M3), ("Mphi", Mphi)):
        _require_positive_int(name, val)
    _require_positive_int("Mtheta", Mtheta, minimum=2)
    if T < dt:
        raise ConfigError(f"T must be at least dt, got T={T!r}, dt={dt!r}")

    dx1, dx2, dx3 = L1 / M1, L2 / M2, L3 / M3
    dtheta = np.pi / Mtheta
    dphi = 2.0 * np.pi / Mphi

    thetas = [0.0]
    phis = [0.0]
    for m in range(1, Mtheta):
        for n in range(Mphi):
            thetas.append(m * dtheta)
            phis.append(n * dphi)
    thetas.append(np.pi)
    phis.append(0.0)
    dir_theta = np.asarray(thetas)
    dir_phi = np.asarray(phis)

    st = _snap_components(np.sin(dir_theta))
    ct = _snap_components(np.cos(dir_theta))
    cp = _snap_components(np.cos(dir_phi))
    sp = _snap_components(np.sin(dir_phi))
    xi = np.stack([_snap_components(st * cp),
                   _snap_components(st * sp),
                   ct], axis=1)

    weight = dtheta * dphi * np.sin(dir_theta)
    weight[0] = 0.0
    weight[-1] = 0.0

    return Grid3D(float(L1), float(L2), float(L3), int(M1), int(M2), int(M3),
                  int(Mtheta), int(Mphi), float(dt), float(T),
                  dx1, dx2, dx3, dtheta, dphi,
                  dx1 * np.arange(M1 + 1), dx2 * np.arange(M2 + 1),
                  dx3 * np.arange(M3 + 1), xi, dir_theta, dir_phi, weight)


@dataclass(frozen=True)
class Medium:
    """Optical coefficients sampled on the grid plus derived bounds.

    Bounds are computed by scanning the grid samples, never trusted from
    configuration; declared values are cross-checked on build.  ``mu_star``
    is +inf when scattering is absent everywhere.
    """

    c: FloatArray
    mu_a: FloatArray
    mu_s: FloatArray
    c_plus: float
    mu_a_plus: float
    mu_s_plus: float
    mu_star: float
    c_mua_minus: float

    @property
    def removal(self) -> FloatArray:
        return self.mu_a + self.mu_s


_DECLARED_KEYS = {"c_plus", "mu_a_plus", "mu_s_plus", "mu_star", "c_mua_minus"}


def _sample_coefficient(name: str, spec, grid) -> FloatArray:
    if grid.dimension == 2:
        X1, X2 = grid.node_mesh()
        args = (X1, X2)
        shape = (grid.M1 + 1, grid.M2 + 1)
    else:
        X1, X2, X3 = np.meshgrid(grid.x1, grid.x2, grid.x3, indexing="ij")
        args = (X1, X2, X3)
        shape = (grid.M1 + 1, grid.M2 + 1, grid.M3 + 1)
    if callable(spec):
        vals = np.asarray(spec(*args), dtype=float)
        vals = np.broadcast_to(vals, shape).copy()
    else:
        vals = np.full(shape, float(spec))
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"medium.{name} evaluates to non-finite values")
    return vals


def build_medium(grid, c, mu_a, mu_s, declared: Optional[dict] = None) -> Medium:
    """Sample coefficient fields on the grid and derive bounds.

    ``c``, ``mu_a``, ``mu_s`` may be numbers or callables of the spatial
    coordinates.  Requires c > 0 everywhere, mu_a, mu_s >= 0, and mu_a > 0
    wherever mu_s > 0 (so that mu_star = inf mu_a/mu_s is strictly positive
    when scattering is present).
    """
    C = _sample_coefficient("c", c, grid)
    MUA = _sample_coefficient("mu_a", mu_a, grid)
    MUS = _sample_coefficient("mu_s", mu_s, grid)

    if np.any(C <= 0):
        raise ConfigError("medium.c must be positive at every grid point")
    if np.any(MUA < 0):
        raise ConfigError("medium.mu_a must be nonnegative at every grid point")
    if np.any(MUS < 0):
        raise ConfigError("medium.mu_s must be nonnegative at every grid point")

    scattering = MUS > 0
    if np.any(scattering):
        if np.any(MUA[scattering] <= 0):
            raise ConfigError(
                "medium.mu_a must be positive wherever mu_s is positive "
                "(the absorption-to-scattering ratio must stay above zero)")
        mu_star = float(np.min(MUA[scattering] / MUS[scattering]))
    else:
        mu_star = np.inf

    med = Medium(
        c=C, mu_a=MUA, mu_s=MUS,
        c_plus=float(np.max(C)),
        mu_a_plus=float(np.max(MUA)),
        mu_s_plus=float(np.max(MUS)),
        mu_star=mu_star,
        c_mua_minus=float(np.min(C * MUA)),
    )

    if declared:
        unknown = set(declared) - _DECLARED_KEYS
        if unknown:
            raise ConfigError(f"unknown declared medium bounds: {sorted(unknown)}")
        for key, val in declared.items():
            have = getattr(med, key)
            ref = max(abs(have), abs(val))
            if ref > 0 and abs(have - val) > 1e-12 * ref:
                raise ConfigError(
                    f"declared medium bound {key}={val!r} disagrees with the "
                    f"scanned value {have!r}")
    return med


@dataclass(frozen=True)
class InflowSet:
    """The discrete inflow boundary: (spatial index..., direction index) entries.

    Entries are ordered face-major (x1=0, x1=L, x2=0, x2=L, [x3=0, x3=L]),
    then by spatial index, then by direction index; corner/edge points are
    listed once, under the first face that claims them (set semantics).
    """

    index: tuple[NDArray[np.intp], ...]   # fancy-index tuple into field storage
    mask: NDArray[np.bool_]
    coords: tuple[FloatArray, ...]        # per-entry x1, x2[, x3], theta[, phi]

    @property
    def size(self) -> int:
        return self.index[0].size if self.index else 0


def _face_lattice_2d(grid: Grid2D, face: str):
    if face == "x1=0":
        i = np.zeros(grid.M2 + 1, dtype=np.intp)
        j = np.arange(grid.M2 + 1, dtype=np.intp)
        inward = np.array([1.0, 0.0])
    elif face == "x1=L1":
        i = np.full(grid.M2 + 1, grid.M1, dtype=np.intp)
        j = np.arange(grid.M2 + 1, dtype=np.intp)
        inward = np.array([-1.0, 0.0])
    elif face == "x2=0":
        i = np.arange(grid.M1 + 1, dtype=np.intp)
        j = np.zeros(grid.M1 + 1, dtype=np.intp)
        inward = np.array([0.0, 1.0])
    else:  # "x2=L2"
        i = np.arange(grid.M1 + 1, dtype=np.intp)
        j = np.full(grid.M1 + 1, grid.M2, dtype=np.intp)
        inward = np.array([0.0, -1.0])
    return i, j, inward


FACES_2D = ("x1=0", "x1=L1", "x2=0", "x2=L2")
FACES_3D = ("x1=0", "x1=L1", "x2=0", "x2=L2", "x3=0", "x3=L3")


def classify_inflow(grid) -> InflowSet:
    """Enumerate the discrete inflow boundary of a 2D or 3D grid.

    A boundary point belongs to the inflow set for direction xi when some
    incident face has outward normal n with n . xi < 0 (strictly; tangential
    directions are excluded).  Corners take the union over incident faces.
    """
    if grid.dimension == 2:
        return _classify_inflow_2d(grid)
    return _classify_inflow_3d(grid)


def _classify_inflow_2d(grid: Grid2D) -> InflowSet:
    mask = np.zeros(grid.shape, dtype=bool)
    ii, jj, nn = [], [], []
    for face in FACES_2D:
        i, j, inward = _face_lattice_2d(grid, face)
        # inflow iff n(x) . xi < 0 iff inward . xi > 0
        dirs = np.nonzero(grid.xi @ inward > 0)[0]
        if dirs.size == 0:
            continue
        fi = np.repeat(i, dirs.size)
        fj = np.repeat(j, dirs.size)
        fn = np.tile(dirs, i.size)
        fresh = ~mask[fi, fj, fn]
        mask[fi[fresh], fj[fresh], fn[fresh]] = True
        ii.append(fi[fresh])
        jj.append(fj[fresh])
        nn.append(fn[fresh])
    if ii:
        iv = np.concatenate(ii)
        jv = np.concatenate(jj)
        nv = np.concatenate(nn)
    else:
        iv = jv = nv = np.zeros(0, dtype=np.intp)
    coords = (grid.x1[iv], grid.x2[jv], grid.theta[nv])
    return InflowSet((iv, jv, nv), mask, coords)


def _face_lattice_3d(grid: Grid3D, face: str):
    r1 = np.arange(grid.M1 + 1, dtype=np.intp)
    r2 = np.arange(grid.M2 + 1, dtype=np.intp)
    r3 = np.arange(grid.M3 + 1, dtype=np.intp)
    if face == "x1=0" or face == "x1=L1":
        J, L = np.meshgrid(r2, r3, indexing="ij")
        I = np.full_like(J, 0 if face == "x1=0" else grid.M1)
        inward = np.array([1.0 if face == "x1=0" else -1.0, 0.0, 0.0])
    elif face == "x2=0" or face == "x2=L2":
        I, L = np.meshgrid(r1, r3, indexing="ij")
        J = np.full_like(I, 0 if face == "x2=0" else grid.M2)
        inward = np.array([0.0, 1.0 if face == "x2=0" else -1.0, 0.0])
    else:
        I, J = np.meshgrid(r1, r2, indexing="ij")
        L = np.full_like(I, 0 if face == "x3=0" else grid.M3)
        inward = np.array([0.0, 0.0, 1.0 if face == "x3=0" else -1.0])
    return I.ravel(), J.ravel(), L.ravel(), inward


def _classify_inflow_3d(grid: Grid3D) -> InflowSet:
    mask = np.zeros(grid.shape, dtype=bool)
    acc = [[], [], [], []]
    for face in FACES_3D:
        i, j, l, inward = _face_lattice_3d(grid, face)
        dirs = np.nonzero(grid.xi @ inward > 0)[0]
        if dirs.size == 0:
            continue
        fi = np.repeat(i, dirs.size)
        fj = np.repeat(j, dirs.size)
        fl = np.repeat(l, dirs.size)
        fd = np.tile(dirs, i.size)
        fresh = ~mask[fi, fj, fl, fd]
        mask[fi[fresh], fj[fresh], fl[fresh], fd[fresh]] = True
        for a, v in zip(acc, (fi, fj, fl, fd)):
            a.append(v[fresh])
    if acc[0]:
        iv, jv, lv, dv = (np.concatenate(a) for a in acc)
    else:
        iv = jv = lv = dv = np.zeros(0, dtype=np.intp)
    coords = (grid.x1[iv], grid.x2[jv], grid.x3[lv],
              grid.dir_theta[dv], grid.dir_phi[dv])
    return InflowSet((iv, jv, lv, dv), mask, coords)


@dataclass
class Field:
    """A full-storage intensity field at one time level.

    ``values`` covers every grid point and direction.  Interior entries are
    unknowns, inflow entries hold the prescribed boundary data for this
    level, everything else is zero.  ``norm_mask`` marks interior-or-inflow
    entries; the sup norm runs over exactly that set.
    """

    grid: object
    values: FloatArray
    k: int
    norm_mask: NDArray[np.bool_] = field(repr=False, default=None)

    @property
    def t(self) -> float:
        return self.k * self.grid.dt


def make_norm_mask(grid, inflow: InflowSet) -> NDArray[np.bool_]:
    return grid.interior_mask() | inflow.mask


def sup_norm(field_obj: Field) -> float:
    """Maximum absolute value over interior and inflow entries."""
    if field_obj.norm_mask is None:
        raise ValueError("field has no norm mask; build it through a problem")
    sel = field_obj.values[field_obj.norm_mask]
    return float(np.max(np.abs(sel))) if sel.size else 0.0


def outflow_padded(field_obj: Field, inflow: InflowSet) -> FloatArray:
    """Copy of the values with non-inflow boundary slots filled for output.

    Each such slot receives the value at the nearest interior point along
    the inward normal (the diagonal neighbor at corners/edges).  Serialization
    uses this copy; solver state never does.
    """
    grid = field_obj.grid
    vals = field_obj.values.copy()
    if grid.dimension == 2:
        if grid.M1 < 2 or grid.M2 < 2:
            return vals
        ib = np.arange(grid.M1 + 1)
        jb = np.arange(grid.M2 + 1)
        ic = np.clip(ib, 1, grid.M1 - 1)
        jc = np.clip(jb, 1, grid.M2 - 1)
        filled = vals[np.ix_(ic, jc)]
        boundary = ~grid.interior_mask() & ~inflow.mask
        vals[boundary] = filled[boundary]
    else:
        if grid.M1 < 2 or grid.M2 < 2 or grid.M3 < 2:
            return vals
        ic = np.clip(np.arange(grid.M1 + 1), 1, grid.M1 - 1)
        jc = np.clip(np.arange(grid.M2 + 1), 1, grid.M2 - 1)
        lc = np.clip(np.arange(grid.M3 + 1), 1, grid.M3 - 1)
        filled = vals[np.ix_(ic, jc, lc)]
        boundary = ~grid.interior_mask() & ~inflow.mask
        vals[boundary] = filled[boundary]
    return vals
