"""Closed-form kernel values, limits, symmetry, and stability."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mehler_bridge import (
    KernelEvaluator,
    NonpositiveTimeError,
    QuadraticRate,
    TimeWindow,
    decompose,
    kernel_original_coords,
    log_kernel_affine,
    log_kernel_heat,
    log_kernel_quadratic,
)
from mehler_bridge.kernels import coth2, csch2, log_sinh
from mehler_bridge.spectral import SpectralData

# frozen golden values, cross-validated by the Fourier-inversion oracle
HEAT_X0_Y1_TAU_QUARTER = 0.2075537487102974
QUAD_L1_ORIGIN_TAU1 = 0.20948100342398213


def _ev(Q, r=None, s=0.0, t0=0.0, t=1.0, sigma=None):
    Q = np.atleast_2d(Q)
    n = Q.shape[0]
    r = np.zeros(n) if r is None else r
    dec = decompose(QuadraticRate(Q=Q, r=r, s=s))
    if sigma is None:
        return KernelEvaluator(dec, TimeWindow(t0, t))
    return KernelEvaluator(dec, TimeWindow(t0, t), sigma)


def test_log_sinh_matches_direct():
    for z in (1e-6, 0.5, 5.0, 19.9):
        assert math.isclose(log_sinh(z), math.log(math.sinh(z)), rel_tol=1e-14)
    # asymptotic branch: log sinh z ~ z - log 2 for large z
    assert math.isclose(log_sinh(400.0), 400.0 - math.log(2.0), rel_tol=1e-15)


def test_hyperbolic_quotients():
    for theta in (1e-6, 0.3, 2.0, 15.0):
        assert math.isclose(coth2(theta), math.cosh(2 * theta) / math.sinh(2 * theta), rel_tol=1e-13)
        assert math.isclose(csch2(theta), 1.0 / math.sinh(2 * theta), rel_tol=1e-13)
    # Laurent branch
    t = 1e-9
    assert math.isclose(coth2(t), 1.0 / (2.0 * t), rel_tol=1e-12)
    assert math.isclose(csch2(t), 1.0 / (2.0 * t), rel_tol=1e-12)
    # no overflow far beyond double sinh range
    assert math.isfinite(coth2(400.0)) and math.isfinite(csch2(400.0))


def test_heat_kernel_unit_normalizer():
    tau = 1.0 / (4.0 * math.pi)
    assert log_kernel_heat([0.3], [0.3], tau) == 0.0


def test_heat_kernel_golden():
    val = math.exp(log_kernel_heat([0.0], [1.0], 0.25))
    assert math.isclose(val, HEAT_X0_Y1_TAU_QUARTER, rel_tol=1e-12)


def test_heat_kernel_tensorizes():
    two_d = log_kernel_heat([0.0, 0.0], [1.0, 1.0], 0.5)
    one_d = log_kernel_heat([0.0], [1.0], 0.5)
    assert math.isclose(two_d, 2.0 * one_d, rel_tol=1e-15)


def test_heat_kernel_rejects_zero_time():
    with pytest.raises(NonpositiveTimeError):
        log_kernel_heat([0.0], [1.0], 0.0)


def test_quadratic_kernel_golden():
    ev = _ev([[2.0]])
    val = math.exp(log_kernel_quadratic(ev, [0.0], [0.0]))
    assert math.isclose(val, QUAD_L1_ORIGIN_TAU1, rel_tol=1e-12)
    assert math.isclose(val, 1.0 / math.sqrt(2.0 * math.pi * math.sinh(2.0)), rel_tol=1e-14)


def test_quadratic_kernel_heat_branch():
    ev = _ev([[2e-12]])
    for x, y in ((0.0, 0.0), (1.3, -0.8), (2.0, 2.0)):
        assert (
            abs(log_kernel_quadratic(ev, [x], [y]) - log_kernel_heat([x], [y], 1.0))
            <= 1e-6
        )


def test_quadratic_kernel_continuity_above_branch():
    # just above the zero-clamp tolerance the closed form stays near heat
    ev = _ev([[2e-8]])
    for x, y in ((0.0, 0.0), (1.3, -0.8)):
        assert (
            abs(log_kernel_quadratic(ev, [x], [y]) - log_kernel_heat([x], [y], 1.0))
            <= 1e-6
        )


def test_mehler_tensorization():
    for n in (2, 3):
        ev_n = _ev(2.0 * np.eye(n))
        ev_1 = _ev([[2.0]])
        x = 0.3 * np.arange(1, n + 1)
        y = -0.2 * np.ones(n)
        total = log_kernel_quadratic(ev_n, x, y)
        parts = sum(log_kernel_quadratic(ev_1, [x[k]], [y[k]]) for k in range(n))
        assert abs(total - parts) <= 1e-12


def test_affine_reduces_to_quadratic():
    ev = _ev([[2.0]])
    for x, y in ((0.0, 0.0), (1.5, -0.7)):
        assert log_kernel_affine(ev, [x], [y]) == log_kernel_quadratic(ev, [x], [y])


def test_affine_shift_example():
    # lam=1, b=2, s=0: delta=1, c=1; log kappa(0,0) = c tau + log kappa_quad(1,1)
    ev = _ev([[2.0]], r=[2.0])
    ev_quad = _ev([[2.0]])
    lhs = log_kernel_affine(ev, [0.0], [0.0])
    rhs = 1.0 * 1.0 + log_kernel_quadratic(ev_quad, [1.0], [1.0])
    assert math.isclose(lhs, rhs, rel_tol=0, abs_tol=1e-12)


def test_affine_constant_rate_is_decay():
    # lam=1, b=0, s=3, tau=0.5: kappa = e^{-s tau} kappa_quad
    ev = _ev([[2.0]], s=3.0, t=0.5)
    ev_quad = _ev([[2.0]], t=0.5)
    for x, y in ((0.0, 0.0), (0.8, -0.3)):
        lhs = log_kernel_affine(ev, [x], [y])
        rhs = log_kernel_quadratic(ev_quad, [x], [y]) - 3.0 * 0.5
        assert abs(lhs - rhs) <= 1e-10


def test_affine_zero_mode_constant_only():
    # flat mode with constant rate: heat kernel times e^{-s tau} per mode
    ev = _ev([[0.0]], s=2.0, t=0.5)
    lhs = ev.log_kernel([0.4], [-0.1])
    rhs = log_kernel_heat([0.4], [-0.1], 0.5) - 2.0 * 0.5
    assert abs(lhs - rhs) <= 1e-12


def test_kind_dispatch():
    assert _ev([[0.0]]).kind == "heat"
    assert _ev([[2.0]]).kind == "quadratic"
    assert _ev([[2.0]], r=[1.0]).kind == "affine"
    assert _ev([[2.0]], s=1.0).kind == "affine"


def test_symmetry_bit_exact():
    rng = np.random.default_rng(23)
    evs = [
        _ev([[0.0, 0.0], [0.0, 0.0]]),
        _ev([[4.0, 2.0], [2.0, 4.0]]),
        _ev([[4.0, 2.0], [2.0, 4.0]], r=[1.0, -0.5], s=0.7),
    ]
    for ev in evs:
        for _ in range(10):
            x = rng.normal(size=2)
            y = rng.normal(size=2)
            assert ev.log_kernel(x, y) == ev.log_kernel(y, x)


def test_positivity_no_overflow_large_theta():
    ev = _ev([[2.0]], t=300.0)
    val = ev.log_kernel([1.0], [2.0])
    assert math.isfinite(val)
    ev_big = _ev([[2.0e4]], t=3.0)  # sqrt(lam) tau = 300
    assert math.isfinite(ev_big.log_kernel([1.0], [2.0]))


def test_original_coords_identity_v():
    ev = _ev([[2.0, 0.0], [0.0, 8.0]])
    z = np.array([0.3, -0.4])
    zp = np.array([0.1, 0.9])
    assert kernel_original_coords(ev, z, zp) == math.exp(ev.log_kernel(z, zp))


def test_original_coords_coupled_origin():
    # lambda = (1, 3); at the origin the prefactor product is the value
    ev = _ev([[4.0, 2.0], [2.0, 4.0]])
    val = math.exp(ev.log_kernel_original([0.0, 0.0], [0.0, 0.0]))
    expected = math.exp(
        sum(
            0.25 * math.log(lam) - 0.5 * math.log(2.0 * math.pi * math.sinh(2.0 * math.sqrt(lam)))
            for lam in (1.0, 3.0)
        )
    )
    assert math.isclose(val, expected, rel_tol=1e-13)


def test_original_coords_degenerate_eigenbasis_invariance():
    # isotropic rate: any orthonormal eigenbasis gives the same kernel
    dec_i = decompose(QuadraticRate(Q=2.0 * np.eye(2), r=np.zeros(2)))
    c, s = math.cos(0.7), math.sin(0.7)
    V_rot = np.array([[c, -s], [s, c]])
    dec_r = SpectralData(V=V_rot, lambdas=dec_i.lambdas, b=np.zeros(2), s=0.0)
    w = TimeWindow(0.0, 1.0)
    ev_i = KernelEvaluator(dec_i, w)
    ev_r = KernelEvaluator(dec_r, w)
    rng = np.random.default_rng(4)
    for _ in range(5):
        zx, zy = rng.normal(size=2), rng.normal(size=2)
        assert math.isclose(
            ev_i.log_kernel_original(zx, zy),
            ev_r.log_kernel_original(zx, zy),
            rel_tol=0,
            abs_tol=1e-12,
        )


def test_tensorization_random_rates():
    rng = np.random.default_rng(9)
    lam = np.array([0.3, 1.0, 2.5])
    ev = KernelEvaluator(
        SpectralData(V=np.eye(3), lambdas=lam, b=np.zeros(3), s=0.0), TimeWindow(0, 0.8)
    )
    for _ in range(5):
        x, y = rng.normal(size=3), rng.normal(size=3)
        total = ev.log_kernel(x, y)
        parts = 0.0
        for k in range(3):
            ev1 = KernelEvaluator(
                SpectralData(V=np.eye(1), lambdas=lam[k : k + 1], b=np.zeros(1), s=0.0),
                TimeWindow(0, 0.8),
            )
            parts += ev1.log_kernel([x[k]], [y[k]])
        assert abs(total - parts) <= 1e-12


def test_quadratic_rejects_zero_time():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    ev = KernelEvaluator(dec, TimeWindow(0.0, 0.0))
    with pytest.raises(NonpositiveTimeError):
        ev.log_kernel([0.0], [0.0])


def test_evaluator_rejects_bad_sigma():
    dec = decompose(QuadraticRate(Q=[[2.0]], r=[0.0]))
    with pytest.raises(ValueError):
        KernelEvaluator(dec, TimeWindow(0.0, 1.0), 0)
