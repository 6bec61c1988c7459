"""Quadrature lemma corpus, slow-decay kernel, manufactured solutions,
refinement studies, and the dense cross-check."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rtupwind import (
    ConfigError,
    algebraic_decay_kernel,
    angular_study,
    build_grid2d,
    build_medium,
    dense_stationary_solve,
    fit_order,
    hg2d,
    make_problem_2d,
    periodic_trapezoid,
    polynomial_bump_mms,
    separable_solution,
    solve_stationary,
    solution_error,
    spacetime_study,
    steady_residual,
    trapezoid_error_bound,
)

_FINE = np.linspace(0.0, 2.0 * np.pi, 200001)


def _trig(coeffs):
    """(m, a, b) list -> (f, exact integral, sup|f''| on a fine grid)."""
    def f(th):
        th = np.asarray(th, dtype=float)
        out = np.zeros(th.shape)
        for m, a, b in coeffs:
            out += a * np.cos(m * th) + b * np.sin(m * th)
        return out

    def d2(th):
        out = np.zeros(th.shape)
        for m, a, b in coeffs:
            out += -m * m * (a * np.cos(m * th) + b * np.sin(m * th))
        return out

    exact = 2.0 * np.pi * sum(a for m, a, _ in coeffs if m == 0)
    return f, exact, float(np.max(np.abs(d2(_FINE))))


def _corpus():
    rng = np.random.default_rng(17)
    cases = []
    for m in range(8):
        cases.append([(m, 1.0, 0.0)])
        cases.append([(m, 0.0, 1.0)])
    for _ in range(6):
        ms = rng.integers(0, 13, size=4)
        cases.append([(int(m), float(rng.normal()), float(rng.normal()))
                      for m in ms])
    # aliased modes at and beyond the node counts used below
    cases.append([(16, 0.8, 0.0), (3, 1.0, 0.2)])
    cases.append([(27, -0.4, 0.1), (0, 2.0, 0.0)])
    cases.append([(32, 1.3, 0.0)])
    return [_trig(c) for c in cases]


def test_quadrature_error_bound_on_trig_corpus():
    for f, exact, d2_sup in _corpus():
        for M in (5, 9, 16, 27):
            err = abs(periodic_trapezoid(f, M) - exact)
            bound = trapezoid_error_bound(d2_sup, M)
            assert err <= bound * (1.0 + 1e-6) + 1e-9


def test_quadrature_error_bound_on_smooth_functions():
    # analytic integrands with known integrals and explicit f''
    def f1(th):
        return np.exp(np.cos(th))

    def d2f1(th):
        return np.exp(np.cos(th)) * (np.sin(th) ** 2 - np.cos(th))

    def f2(th):
        return 1.0 / (2.0 + np.sin(th))

    def d2f2(th):
        s = 2.0 + np.sin(th)
        return np.sin(th) / s ** 2 + 2.0 * np.cos(th) ** 2 / s ** 3

    for f, d2, exact in (
            (f1, d2f1, 2.0 * np.pi * np.i0(1.0)),
            (f2, d2f2, 2.0 * np.pi / np.sqrt(3.0))):
        d2_sup = float(np.max(np.abs(d2(_FINE))))
        for M in (4, 6, 10, 18):
            err = abs(periodic_trapezoid(f, M) - exact)
            assert err <= trapezoid_error_bound(d2_sup, M) * (1.0 + 1e-6)


def test_aliasing_saturates_near_the_bound():
    # f = cos(M theta) hits every node at 1, so the quadrature returns
    # 2 pi while the integral vanishes
    M = 8
    err = abs(periodic_trapezoid(lambda th: np.cos(M * th), M) - 0.0)
    assert err == pytest.approx(2.0 * np.pi, abs=1e-12)
    bound = trapezoid_error_bound(float(M * M), M)
    assert bound == pytest.approx(np.pi ** 3 / 3.0, rel=1e-15)
    assert err < bound

    with pytest.raises(ValueError):
        periodic_trapezoid(lambda th: th, 0)


def test_slow_kernel_matches_direct_summation():
    k = algebraic_decay_kernel()
    alphas = np.array([0.0, 0.3, 1.0, np.pi, 4.0, 2.0 * np.pi - 0.3])
    m = np.arange(1, 200001, dtype=float)
    tau = (1.0 + m * m) ** -2.0
    want = (0.5 + np.cos(np.outer(alphas, m)) @ tau) / np.pi
    got = k.eval(alphas)
    assert np.allclose(got, want, rtol=0.0, atol=5e-13)
    # periodic and even
    assert np.allclose(k.eval(alphas + 2.0 * np.pi), got, atol=1e-13)
    assert np.allclose(k.eval(-alphas), got, atol=1e-13)


def test_slow_kernel_closed_form_sums():
    # Euler-Maclaurin oracle for sum 1/(1+m^2), sum 1/(1+m^2)^2, and
    # sum m^2/(1+m^2)^2
    N = 1_000_000
    m = np.arange(1, N + 1, dtype=float)
    w = 1.0 / (1.0 + m * m)
    s1 = float(np.sum(w)) + (np.pi / 2.0 - np.arctan(N)) \
        - 0.5 / (1.0 + float(N) ** 2)
    s2 = float(np.sum(w * w))
    sm2 = float(np.sum(m * m * w * w)) \
        + 0.5 * (np.pi / 2.0 - np.arctan(N)) + N / (2.0 * (1.0 + float(N) ** 2)) \
        - 0.5 * N ** 2 / (1.0 + float(N) ** 2) ** 2

    k = algebraic_decay_kernel()
    assert k.sup_bound == pytest.approx((1.0 + 2.0 * s2) / (2.0 * np.pi),
                                        rel=1e-12)
    assert k.d2_bound == pytest.approx(sm2 / np.pi, rel=1e-10)
    assert k.d2_bound == pytest.approx((s1 - s2) / np.pi, rel=1e-10)

    # the sup bound is attained at zero separation
    assert k.sup_bound == pytest.approx(float(k.eval(np.array(0.0))),
                                        rel=1e-12)
    theta = np.linspace(0.0, 2.0 * np.pi, 20001)
    vals = k.eval(theta)
    assert float(np.max(vals)) <= k.sup_bound * (1.0 + 1e-12)
    h = theta[1] - theta[0]
    second = np.abs(vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / h ** 2
    assert float(np.max(second)) <= k.d2_bound * (1.0 + 1e-6)


def test_slow_kernel_mass_and_eigenvalues():
    k = algebraic_decay_kernel()
    assert periodic_trapezoid(k.eval, 4096) == pytest.approx(1.0, abs=1e-12)
    for m in (1, 2, 5):
        tau = (1.0 + m * m) ** -2.0
        assert k.fourier_factor(m) == pytest.approx(tau, rel=1e-15)
        proj = periodic_trapezoid(
            lambda th: k.eval(th) * np.cos(m * th), 4096)
        assert proj == pytest.approx(tau, abs=1e-12)
    assert k.analytic_decay is None


def test_slow_kernel_higher_power_and_rejects():
    k3 = algebraic_decay_kernel(power=3, nmax=4000)
    theta = np.linspace(0.0, 2.0 * np.pi, 8001)
    vals = k3.eval(theta)
    assert float(np.max(vals)) <= k3.sup_bound * (1.0 + 1e-12)
    h = theta[1] - theta[0]
    second = np.abs(vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / h ** 2
    assert float(np.max(second)) <= k3.d2_bound * (1.0 + 1e-6)
    assert periodic_trapezoid(k3.eval, 2048) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        algebraic_decay_kernel(power=1)


def test_manufactured_source_satisfies_equation():
    mms = polynomial_bump_mms(hg2d(0.5), L=2.0, c=1.3, mu_a=0.4, mu_s=0.7)
    rng = np.random.default_rng(5)
    pf = hg2d(0.5)
    for _ in range(4):
        t = float(rng.uniform(0.0, 2.0))
        x1 = float(rng.uniform(0.2, 1.8))
        x2 = float(rng.uniform(0.2, 1.8))
        th = float(rng.uniform(0.0, 2.0 * np.pi))

        def I(tt, a, b, thh):
            return float(mms.I(tt, np.asarray(a), np.asarray(b),
                               np.asarray(thh)))

        h = 1e-6
        dIdt = (I(t + h, x1, x2, th) - I(t - h, x1, x2, th)) / (2 * h)
        dIdx1 = (I(t, x1 + h, x2, th) - I(t, x1 - h, x2, th)) / (2 * h)
        dIdx2 = (I(t, x1, x2 + h, th) - I(t, x1, x2 - h, th)) / (2 * h)
        scat, _ = quad(lambda s: float(pf.eval(np.asarray(th - s)))
                       * I(t, x1, x2, s), 0.0, 2.0 * np.pi, limit=200)
        lhs = (dIdt / mms.c
               + math.cos(th) * dIdx1 + math.sin(th) * dIdx2
               + (mms.mu_a + mms.mu_s) * I(t, x1, x2, th)
               - mms.mu_s * scat)
        q = float(mms.q(t, np.asarray(x1), np.asarray(x2), np.asarray(th)))
        assert lhs == pytest.approx(q, rel=2e-6, abs=2e-6)


def test_manufactured_boundary_and_initial_agree():
    mms = polynomial_bump_mms(hg2d(0.3), L=2.0)
    grid = build_grid2d(L1=2.0, L2=2.0, M1=6, M2=6, M=12, dt=0.05, T=0.1)
    x = mms.exact_values(grid, 0.0)
    X1, X2, TH = grid.full_coords()
    got = mms.initial()(X1, X2, TH)
    assert np.allclose(np.broadcast_to(got, grid.shape), x, atol=1e-15)
    # vanishes on the spatial boundary by construction
    assert np.all(x[0] == 0.0) and np.all(x[-1] == 0.0)
    assert np.all(x[:, 0] == 0.0) and np.all(x[:, -1] == 0.0)


def test_mode_rescale_requires_eigenvalues():
    import dataclasses
    pf = dataclasses.replace(hg2d(0.3), fourier_factor=None)
    with pytest.raises(ConfigError):
        separable_solution(pf, [(0, 1.0, 0.0)], c=1.0, mu_a=0.3, mu_s=0.2,
                           time_fn=lambda t: 1.0, dtime_fn=lambda t: 0.0,
                           space_fn=lambda a, b: a, dspace1_fn=lambda a, b: 1.0,
                           dspace2_fn=lambda a, b: 0.0)


def test_spacetime_refinement_is_first_order():
    mms = polynomial_bump_mms(hg2d(0.4), L=2.0, c=1.0, mu_a=0.3, mu_s=0.5)
    study = spacetime_study(mms, L1=2.0, L2=2.0, M1=6, M2=6, M=12,
                            dt=0.05, T=0.4, n_levels=3)
    assert study.monotone
    assert 0.7 <= study.fitted_order <= 1.3
    assert np.all(study.orders > 0.5)
    d = study.to_dict()
    assert d["refine"] == "spacetime" and len(d["levels"]) == 3


def test_angular_refinement_shows_quartic_rate(tmp_path):
    k = algebraic_decay_kernel()
    study = angular_study(k, [8, 16, 32, 64])
    assert study.monotone
    assert 3.5 <= study.fitted_order <= 4.5
    assert np.all(study.orders > 3.0)
    out = tmp_path / "angular.csv"
    study.write_csv(out)
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 5
    assert lines[0].startswith("level,")

    with pytest.raises(ValueError):
        angular_study(k, [4])


def test_fit_order_edges_and_exact_recovery():
    hs = np.array([0.4, 0.2, 0.1, 0.05])
    errors = 3.7 * hs ** 1.8
    assert fit_order(hs, errors) == pytest.approx(1.8, rel=1e-12)
    assert fit_order(hs, errors, last=2) == pytest.approx(1.8, rel=1e-12)
    with pytest.raises(ValueError):
        fit_order([0.1], [0.5])
    with pytest.raises(ValueError):
        fit_order([0.2, 0.1], [0.1, 0.0])


def test_dense_solve_matches_fixed_point_iteration():
    grid = build_grid2d(L1=1.5, L2=1.5, M1=4, M2=4, M=8, dt=0.05, T=0.05)
    med = build_medium(grid, c=1.0, mu_a=0.5, mu_s=0.4)
    prob = make_problem_2d(grid, med, hg2d(0.3), q=0.7, I1=0.4)
    direct = dense_stationary_solve(prob)
    iterated = solve_stationary(prob, tol=1e-14)
    gap = float(np.max(np.abs(direct.values - iterated.field.values)))
    assert gap <= 1e-12
    assert steady_residual(prob, direct) <= 1e-12

    with pytest.raises(ValueError):
        dense_stationary_solve(prob, cap=10)
    bad = make_problem_2d(grid, med, hg2d(0.3),
                          q=lambda t, a, b, th: t + 0.0 * (a + b + th))
    with pytest.raises(ConfigError):
        dense_stationary_solve(bad)
