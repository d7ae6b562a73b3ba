"""Symbol coefficients, brackets, and the symbol PDE residual."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mehler_bridge import (
    AFFINE_SIGN,
    QuadraticRate,
    SymbolPoint,
    TimeWindow,
    UnsupportedOrderError,
    beta_closed,
    decompose,
    log_alpha_closed,
    poisson_bracket_j,
    symbol_h,
    symbol_pde_residual,
    symbol_q,
)

from oracles import beta_ode_oracle, log_alpha_affine_oracle, log_alpha_quadratic_oracle

# frozen from the RK4 oracles (step 1e-4)
BETA_LAM4_TAU_HALF = 0.3807970779778824  # tanh(1)/2
LOG_SECH_1 = -0.4337808304830271
LOG_ALPHA_AFFINE_L1_B2_TAU1 = -0.19537498643879203


def test_beta_golden_and_oracle():
    assert math.isclose(beta_closed(4.0, 0.5), BETA_LAM4_TAU_HALF, abs_tol=1e-15)
    assert abs(beta_closed(4.0, 0.5) - beta_ode_oracle(4.0, 0.5)) <= 1e-10


def test_beta_initial_and_flat_mode():
    assert beta_closed(1.0, 0.0) == 0.0
    assert beta_closed(0.0, 2.5) == 2.5


def test_beta_monotone_and_bounded():
    lam = 3.0
    taus = np.linspace(0.01, 10.0, 40)
    vals = [beta_closed(lam, t) for t in taus]
    assert all(b2 > b1 for b1, b2 in zip(vals, vals[1:]))
    assert all(v < 1.0 / math.sqrt(lam) for v in vals)


def test_beta_continuity_in_lambda():
    # |beta(lam, tau) - beta(0, tau)| <= C lam with C frozen at 340 (tau <= 10)
    for lam in (1e-12, 1e-9, 1e-7, 1e-6):
        for tau in (0.1, 1.0, 10.0):
            assert abs(beta_closed(lam, tau) - beta_closed(0.0, tau)) <= 340.0 * lam


def test_log_alpha_quadratic_golden():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    val = log_alpha_closed(dec, 1.0)
    assert math.isclose(val, LOG_SECH_1, abs_tol=1e-14)
    assert abs(val - log_alpha_quadratic_oracle([1.0], 1.0)) <= 1e-9
    assert log_alpha_closed(dec, 0.0) == 0.0


def test_log_alpha_affine_golden():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[2.0]))
    val = log_alpha_closed(dec, 1.0)
    assert math.isclose(val, LOG_ALPHA_AFFINE_L1_B2_TAU1, abs_tol=1e-13)
    oracle = log_alpha_affine_oracle([1.0], dec.c, 1.0)
    assert abs(val - oracle) <= 1e-9


def test_coefficient_odes_against_rk4_grid():
    # closed forms vs RK4 across the (lam, tau) grid
    for lam in (0.01, 1.0, 100.0):
        dec = decompose(QuadraticRate(Q=[[2.0 * lam]], r=[0.0]))
        for tau in (0.1, 1.0, 5.0):
            assert abs(beta_closed(lam, tau) - beta_ode_oracle(lam, tau)) <= 1e-8
            assert (
                abs(log_alpha_closed(dec, tau) - log_alpha_quadratic_oracle([lam], tau))
                <= 1e-8
            )


def test_symbol_q_examples():
    d1 = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    assert symbol_q(d1, SymbolPoint([0.0], [0.0])) == 0.0
    d2 = decompose(QuadraticRate(Q=[[2.0, 0.0], [0.0, 8.0]], r=[0.0, 0.0]))
    assert symbol_q(d2, SymbolPoint([1.0, 1.0], [2.0, 0.0])) == 9.0
    d3 = decompose(QuadraticRate(Q=[[2.0]], r=[3.0], s=5.0))
    assert symbol_q(d3, SymbolPoint([2.0], [0.0])) == 15.0


def test_symbol_h_unity_at_zero_elapsed():
    for rate in (
        QuadraticRate(Q=[[2.0]], r=[0.0]),
        QuadraticRate(Q=[[2.0]], r=[2.0], s=1.0),
    ):
        dec = decompose(rate)
        w = TimeWindow(0.4, 0.4)
        assert symbol_h(dec, SymbolPoint([1.3], [-0.2]), w) == 1.0


def test_symbol_h_sech_value():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    h = symbol_h(dec, SymbolPoint([0.0], [0.0]), TimeWindow(0.0, 1.0))
    assert math.isclose(h, 1.0 / math.cosh(1.0), rel_tol=1e-14)


def test_symbol_h_heat_reduction():
    dec = decompose(QuadraticRate(Q=np.zeros((2, 2)), r=np.zeros(2)))
    tau = 0.7
    xi = np.array([0.4, -1.1])
    h = symbol_h(dec, SymbolPoint([0.3, 0.9], xi), TimeWindow(0.0, tau))
    assert math.isclose(h, math.exp(-tau * float(xi @ xi)), rel_tol=1e-14)


def test_symbol_h_no_overflow():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    h = symbol_h(dec, SymbolPoint([1.0], [1.0]), TimeWindow(0.0, 400.0))
    assert math.isfinite(h) and h >= 0.0


def test_bracket_order_zero_is_product():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    f = lambda x, xi: float(x[0] ** 2 + xi[0])
    g = lambda x, xi: float(math.sin(x[0]) + xi[0] ** 2)
    p = SymbolPoint([0.3], [0.7])
    assert poisson_bracket_j(f, g, p, 0) == pytest.approx(f(p.x, p.xi) * g(p.x, p.xi))


def test_bracket_self_is_zero():
    f = lambda x, xi: float(x[0] ** 2 * xi[0] + 3.0 * x[0])
    p = SymbolPoint([0.5], [-1.2])
    assert abs(poisson_bracket_j(f, f, p, 1)) <= 1e-8


def test_bracket_antisymmetry_random_polynomials():
    rng = np.random.default_rng(19)
    for _ in range(5):
        cf = rng.normal(size=6)
        cg = rng.normal(size=6)

        def poly(c):
            return lambda x, xi: float(
                c[0]
                + c[1] * x[0]
                + c[2] * xi[0]
                + c[3] * x[0] * xi[0]
                + c[4] * x[0] ** 2
                + c[5] * xi[0] ** 2
            )

        f, g = poly(cf), poly(cg)
        p = SymbolPoint(rng.normal(size=1), rng.normal(size=1))
        fg = poisson_bracket_j(f, g, p, 1)
        gf = poisson_bracket_j(g, f, p, 1)
        assert abs(fg + gf) <= 1e-6


def test_bracket_generator_with_symbol_vanishes_at_order_one():
    dec = decompose(QuadraticRate(Q=[[4.0, 2.0], [2.0, 4.0]], r=[0.0, 0.0]))
    w = TimeWindow(0.0, 0.7)
    q = lambda x, xi: symbol_q(dec, SymbolPoint(x, xi))
    h = lambda x, xi: symbol_h(dec, SymbolPoint(x, xi), w)
    rng = np.random.default_rng(2)
    for _ in range(5):
        p = SymbolPoint(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        assert abs(poisson_bracket_j(q, h, p, 1)) <= 1e-6


def test_bracket_order_two_closed_form():
    # {q, e^{-tau q}}_2 = (2 tau tr(L) - 2 tau^2 (x'L^2 x + xi'L xi)) e^{-tau q}
    dec = decompose(QuadraticRate(Q=[[4.0, 2.0], [2.0, 4.0]], r=[0.0, 0.0]))
    tau = 0.7
    lam = dec.lambdas
    q = lambda x, xi: float(xi @ xi + lam @ (x * x))
    g = lambda x, xi: math.exp(-tau * q(x, xi))
    rng = np.random.default_rng(42)
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        xi = rng.uniform(-1, 1, 2)
        val = poisson_bracket_j(q, g, SymbolPoint(x, xi), 2)
        closed = (
            2.0 * tau * lam.sum()
            - 2.0 * tau**2 * (x @ (lam**2 * x) + xi @ (lam * xi))
        ) * g(x, xi)
        assert abs(val - closed) <= 1e-5
        assert abs(val.imag) == 0.0


def test_bracket_rejects_high_order():
    f = lambda x, xi: 1.0
    with pytest.raises(UnsupportedOrderError):
        poisson_bracket_j(f, f, SymbolPoint([0.0], [0.0]), 3)


def test_symbol_pde_residual_quadratic():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    r = symbol_pde_residual(dec, SymbolPoint([0.3], [-0.2]), TimeWindow(0.0, 0.7))
    assert r <= 1e-6


def test_symbol_pde_residual_heat():
    dec = decompose(QuadraticRate(Q=[[0.0]], r=[0.0]))
    r = symbol_pde_residual(dec, SymbolPoint([0.3], [-0.2]), TimeWindow(0.0, 0.7))
    assert r <= 1e-8


def test_symbol_pde_residual_short_time():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    r = symbol_pde_residual(dec, SymbolPoint([0.3], [-0.2]), TimeWindow(0.0, 1e-6))
    assert r <= 1e-4


def test_symbol_pde_residual_affine():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[2.0], s=1.0))
    r = symbol_pde_residual(dec, SymbolPoint([0.4], [0.3]), TimeWindow(0.0, 0.8))
    assert r <= 1e-6


def test_symbol_pde_residual_rejects_wrong_sign():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[2.0]))
    right = symbol_pde_residual(dec, SymbolPoint([0.4], [0.3]), TimeWindow(0.0, 1.0), sigma=AFFINE_SIGN)
    wrong = symbol_pde_residual(dec, SymbolPoint([0.4], [0.3]), TimeWindow(0.0, 1.0), sigma=-AFFINE_SIGN)
    assert right <= 1e-6 < 1e-2 <= wrong


def test_time_window_validation():
    with pytest.raises(ValueError):
        TimeWindow(1.0, 0.5)
    with pytest.raises(ValueError):
        TimeWindow(-0.1, 0.5)
    assert TimeWindow(0.25, 1.0).tau == 0.75
