"""Scattering phase functions and the angular-resolution conditions.

A phase function is a nonnegative density over the scattering angle alpha
between incoming and outgoing directions: on the circle it is even and
2*pi-periodic with integral 1 over a period, on the sphere it integrates
to 1 against sin(alpha) d alpha d phi.  Two sufficient conditions guard the
angular discretization: a second-derivative (composite-trapezoid) bound and
a Fourier-decay bound for analytic kernels.  Either one passing admits a
run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError

FloatArray = NDArray[np.float64]

_D2_SAMPLES = 4096    # dense-sampling resolution for derivative bounds
_D2_SAFETY = 1.01     # sampled maxima are inflated; conditions stay sufficient


@dataclass
class PhaseFunction:
    """A scattering kernel together with the bounds the solver needs.

    ``eval`` maps scattering angles (radians, any real values) to densities.
    ``d2_bound`` dominates |d^2 p/d alpha^2|; ``analytic_decay`` is a pair
    (C, r) with |c_n| <= C r^|n| for the Fourier cosine coefficients (2D
    only).  Either may be None when unknown, which simply makes the
    corresponding condition check inapplicable.  ``du``/``d2u`` are
    derivatives with respect to u = cos(alpha), used by the 3D condition.
    ``fourier_factor`` maps mode m to 2*pi*c_m (2D), used to build exact
    scattering integrals for band-limited fields.
    """

    dimension: int
    label: str
    eval: Callable[[FloatArray], FloatArray]
    sup_bound: float
    d2_bound: Optional[float] = None
    analytic_decay: Optional[tuple[float, float]] = None
    fourier_factor: Optional[Callable[[np.ndarray], np.ndarray]] = None
    du: Optional[Callable[[FloatArray], FloatArray]] = None
    d2u: Optional[Callable[[FloatArray], FloatArray]] = None
    is_hg: bool = False
    g: Optional[float] = None
    x_dependent: bool = False
    eval_x: Optional[Callable] = None

    def __call__(self, alpha):
        return self.eval(np.asarray(alpha, dtype=float))


def _sampled_max(fn: Callable[[FloatArray], FloatArray],
                 lo: float = 0.0, hi: float = np.pi,
                 n: int = _D2_SAMPLES) -> float:
    a = np.linspace(lo, hi, n)
    return float(np.max(np.abs(fn(a))))


def hg2d(g: float) -> PhaseFunction:
    """Henyey-Greenstein kernel on the circle, anisotropy g in [0, 1)."""
    if not 0.0 <= g < 1.0:
        raise ValueError(f"anisotropy g must lie in [0, 1), got {g!r}")
    g = float(g)
    one = 1.0 - g * g

    def p(alpha):
        alpha = np.asarray(alpha, dtype=float)
        return one / (2.0 * np.pi * (1.0 + g * g - 2.0 * g * np.cos(alpha)))

    def d2_alpha(alpha):
        # second derivative in alpha, closed form
        d = 1.0 + g * g - 2.0 * g * np.cos(alpha)
        s, c = np.sin(alpha), np.cos(alpha)
        return -one * 2.0 * g * (c * d - 4.0 * g * s * s) / (2.0 * np.pi * d ** 3)

    def p_u(u):
        d = 1.0 + g * g - 2.0 * g * np.asarray(u, dtype=float)
        return one * 2.0 * g / (2.0 * np.pi * d * d)

    def p_uu(u):
        d = 1.0 + g * g - 2.0 * g * np.asarray(u, dtype=float)
        return one * 8.0 * g * g / (2.0 * np.pi * d ** 3)

    def factor(m):
        return g ** np.abs(np.asarray(m))

    d2 = 0.0 if g == 0.0 else _D2_SAFETY * _sampled_max(d2_alpha)
    return PhaseFunction(
        dimension=2,
        label="uniform" if g == 0.0 else f"hg2d(g={g})",
        eval=p,
        sup_bound=(1.0 + g) / (2.0 * np.pi * (1.0 - g)),
        d2_bound=d2,
        analytic_decay=(1.0 / (2.0 * np.pi), g),
        fourier_factor=factor,
        du=p_u,
        d2u=p_uu,
        is_hg=True,
        g=g,
    )


def hg3d(g: float) -> PhaseFunction:
    """Henyey-Greenstein kernel on the sphere, anisotropy g in [0, 1)."""
    if not 0.0 <= g < 1.0:
        raise ValueError(f"anisotropy g must lie in [0, 1), got {g!r}")
    g = float(g)
    one = 1.0 - g * g

    def p(alpha):
        alpha = np.asarray(alpha, dtype=float)
        d = 1.0 + g * g - 2.0 * g * np.cos(alpha)
        return one / (4.0 * np.pi * d ** 1.5)

    def d2_alpha(alpha):
        u = np.cos(np.asarray(alpha, dtype=float))
        s2 = 1.0 - u * u
        return p_uu(u) * s2 - p_u(u) * u

    def p_u(u):
        d = 1.0 + g * g - 2.0 * g * np.asarray(u, dtype=float)
        return 3.0 * g * one / (4.0 * np.pi * d ** 2.5)

    def p_uu(u):
        d = 1.0 + g * g - 2.0 * g * np.asarray(u, dtype=float)
        return 15.0 * g * g * one / (4.0 * np.pi * d ** 3.5)

    d2 = 0.0 if g == 0.0 else _D2_SAFETY * _sampled_max(d2_alpha)
    return PhaseFunction(
        dimension=3,
        label="uniform" if g == 0.0 else f"hg3d(g={g})",
        eval=p,
        sup_bound=(1.0 + g) / (4.0 * np.pi * (1.0 - g) ** 2),
        d2_bound=d2,
        analytic_decay=None,
        fourier_factor=None,
        du=p_u,
        d2u=p_uu,
        is_hg=True,
        g=g,
    )


def uniform2d() -> PhaseFunction:
    return hg2d(0.0)


def uniform3d() -> PhaseFunction:
    return hg3d(0.0)


def tabulated_kernel(alpha: FloatArray, values: FloatArray, dimension: int = 2,
                     analytic_decay: Optional[tuple[float, float]] = None,
                     label: str = "tabulated") -> PhaseFunction:
    """Kernel from (alpha, density) samples on [0, pi].

    The table must be strictly increasing and cover both endpoints.  It is
    mirrored to an even, 2*pi-periodic C^2 cubic interpolant; the
    second-derivative bound comes from the interpolant itself (its second
    derivative is piecewise linear, so the knot maximum is exact).
    Normalization over a period is validated to 1e-6.
    """
    from scipy.interpolate import CubicSpline

    alpha = np.asarray(alpha, dtype=float)
    values = np.asarray(values, dtype=float)
    if alpha.ndim != 1 or alpha.shape != values.shape:
        raise ConfigError("kernel table must be two columns of equal length")
    if alpha.size < 4:
        raise ConfigError("kernel table needs at least 4 rows")
    if np.any(np.diff(alpha) <= 0):
        raise ConfigError("kernel table angles must be strictly increasing")
    if abs(alpha[0]) > 1e-12 or abs(alpha[-1] - np.pi) > 1e-12:
        raise ConfigError("kernel table must span [0, pi] including endpoints")
    if np.any(values < 0):
        raise ConfigError("kernel table densities must be nonnegative")

    # even + periodic extension over [0, 2*pi]
    ax = np.concatenate([alpha, 2.0 * np.pi - alpha[-2::-1]])
    vx = np.concatenate([values, values[-2::-1]])
    spline = CubicSpline(ax, vx, bc_type="periodic")

    def p(a):
        a = np.mod(np.asarray(a, dtype=float), 2.0 * np.pi)
        return spline(a)

    d2_knots = float(np.max(np.abs(spline(ax, 2))))

    if dimension == 2:
        total = float(spline.integrate(0.0, 2.0 * np.pi))
    elif dimension == 3:
        from scipy.integrate import quad
        total = 2.0 * np.pi * quad(lambda t: float(spline(t)) * math.sin(t),
                                   0.0, np.pi, limit=200)[0]
    else:
        raise ConfigError(f"kernel dimension must be 2 or 3, got {dimension!r}")
    if abs(total - 1.0) > 1e-6:
        raise ConfigError(
            f"kernel table is not normalized: integral {total!r} (want 1 within 1e-6)")

    if analytic_decay is not None:
        C, r = analytic_decay
        if not (C > 0 and 0.0 <= r < 1.0):
            raise ConfigError("analytic decay must satisfy C > 0 and 0 <= r < 1")

    eps = 1e-6

    def p_u(u):
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        a = np.clip(np.arccos(u), eps, np.pi - eps)
        return -spline(a, 1) / np.sin(a)

    def p_uu(u):
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        a = np.clip(np.arccos(u), eps, np.pi - eps)
        s = np.sin(a)
        return (spline(a, 2) - spline(a, 1) * np.cos(a) / s) / (s * s)

    return PhaseFunction(
        dimension=dimension,
        label=label,
        eval=p,
        sup_bound=_D2_SAFETY * max(_sampled_max(p, 0.0, np.pi, 8192),
                                   float(np.max(values))),
        d2_bound=d2_knots,
        analytic_decay=analytic_decay,
        fourier_factor=None,
        du=p_u,
        d2u=p_uu,
    )


def load_kernel_table(path, dimension: int = 2,
                      analytic_decay: Optional[tuple[float, float]] = None) -> PhaseFunction:
    """Load a two-column (alpha, density) text table with one header line."""
    try:
        data = np.loadtxt(path, skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read kernel table {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed kernel table {path!r}: {exc}") from exc
    if data.shape[1] != 2:
        raise ConfigError(f"kernel table {path!r} must have exactly two columns")
    return tabulated_kernel(data[:, 0], data[:, 1], dimension=dimension,
                            analytic_decay=analytic_decay,
                            label=f"table({path})")


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one angular-resolution condition check."""

    kind: str
    applicable: bool
    passes: bool
    passes_strict: bool
    lhs: float
    bound: float
    margin: float
    threshold: Optional[float] = None   # real-valued minimal direction count
    minimal_M: Optional[int] = None
    note: str = ""

    def to_dict(self) -> dict:
        def clean(v):
            if v is None:
                return None
            if isinstance(v, float) and not math.isfinite(v):
                return repr(v)
            return v
        return {
            "kind": self.kind,
            "applicable": self.applicable,
            "passes": self.passes,
            "passes_strict": self.passes_strict,
            "lhs": clean(self.lhs),
            "bound": clean(self.bound),
            "margin": clean(self.margin),
            "threshold": clean(self.threshold),
            "minimal_M": self.minimal_M,
            "note": self.note,
        }


_INAPPLICABLE = dict(applicable=False, passes=False, passes_strict=False,
                     lhs=np.nan, bound=np.nan, margin=np.nan)


def check_theta_condition_c2(pf: PhaseFunction, dtheta: float,
                             mu_star: float) -> ConditionResult:
    """Second-derivative condition: sup|p''| * dtheta^2 <= (12/pi) * mu_star."""
    if pf.d2_bound is None:
        return ConditionResult(kind="second_derivative",
                               note="kernel carries no second-derivative bound; "
                                    "use the analytic-decay check",
                               **_INAPPLICABLE)
    lhs = pf.d2_bound * dtheta * dtheta
    bound = (12.0 / np.pi) * mu_star
    return ConditionResult(
        kind="second_derivative",
        applicable=True,
        passes=bool(lhs <= bound),
        passes_strict=bool(lhs < bound),
        lhs=float(lhs),
        bound=float(bound),
        margin=float(bound - lhs),
    )


def check_theta_condition_analytic(pf: PhaseFunction, M: int,
                                   mu_star: float) -> ConditionResult:
    """Fourier-decay condition: 4*pi*C*r^M / (1 - r^M) <= mu_star.

    Also reports the smallest direction count satisfying the bound.  For a
    Henyey-Greenstein kernel (C = 1/(2*pi), r = g) the left side reduces to
    2 g^M / (1 - g^M).
    """
    if pf.analytic_decay is None:
        return ConditionResult(kind="analytic_decay",
                               note="kernel carries no Fourier decay envelope",
                               **_INAPPLICABLE)
    C, r = pf.analytic_decay
    if not (0.0 <= r < 1.0):
        raise ValueError(f"decay ratio r must lie in [0, 1), got {r!r}")
    if C <= 0:
        raise ValueError(f"decay constant C must be positive, got {C!r}")
    if r == 0.0:
        lhs = 0.0
        threshold = 0.0
        minimal = 1
    else:
        rM = r ** M
        lhs = 4.0 * np.pi * C * rM / (1.0 - rM)
        if math.isfinite(mu_star):
            target = mu_star / (4.0 * np.pi * C + mu_star)
            threshold = math.log(target) / math.log(r)
            minimal = max(1, math.ceil(threshold - 1e-9))
        else:
            threshold = 0.0
            minimal = 1
    bound = mu_star
    return ConditionResult(
        kind="analytic_decay",
        applicable=True,
        passes=bool(lhs <= bound),
        passes_strict=bool(lhs < bound),
        lhs=float(lhs),
        bound=float(bound),
        margin=float(bound - lhs),
        threshold=float(threshold),
        minimal_M=int(minimal),
    )


def scattering_row_sum(pf: PhaseFunction, grid, n: int, x=None) -> float:
    """Quadrature mass dtheta * sum_nu p(theta_nu - theta_n) of one row (2D)."""
    alpha = grid.theta - grid.theta[n]
    if pf.x_dependent:
        if x is None:
            raise ValueError("x-dependent kernel needs a spatial point")
        vals = pf.eval_x(alpha, *x)
    else:
        vals = pf.eval(alpha)
    return float(grid.dtheta * np.sum(vals))
