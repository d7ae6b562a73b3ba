"""Closed-form propagation kernels in log space.

Three kinds, all evaluated per modal coordinate and summed:

* heat          -(1/2) log(4 pi tau) - (x-y)^2 / (4 tau)
* quadratic     (1/4) log lam - (1/2) log(2 pi sinh 2 theta)
                - (sqrt(lam)/2)(x^2+y^2) coth 2 theta
                + sqrt(lam) x y / sinh 2 theta,   theta = sqrt(lam) tau
* affine        quadratic plus sigma*(-c tau)
                - tanh(theta) ((b/2)(x+y) + b^2/(4 lam)) / sqrt(lam)

Zero modes fall back to the heat expression (the lam -> 0 limit of the
quadratic one).  Everything is assembled from overflow-free primitives so
log kernels stay finite up to sqrt(lam) tau of several hundred.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonpositiveTimeError
from .spectral import TOL_EIG, SpectralData, to_modal
from .weyl import AFFINE_SIGN, TimeWindow

__all__ = [
    "KernelEvaluator",
    "log_kernel_heat",
    "log_kernel_quadratic",
    "log_kernel_affine",
    "kernel_original_coords",
    "log_kernel_original_coords",
    "pairwise_log_kernel",
    "log_sinh",
    "coth2",
    "csch2",
]

_LOG_2PI = math.log(2.0 * math.pi)

# Below this theta the hyperbolic quotients switch to Laurent expansions
# to avoid cancellation; above ~20 log sinh switches to its asymptotic
# form to avoid overflow.
_THETA_TINY = 1e-8
_LOG_SINH_SWITCH = 20.0


def log_sinh(z):
    """log sinh(z) for z > 0, overflow-free."""
    z = np.asarray(z, dtype=float)
    out = np.where(
        z > _LOG_SINH_SWITCH,
        z + np.log1p(-np.exp(-2.0 * np.minimum(z, 700.0))) - math.log(2.0),
        np.log(np.sinh(np.minimum(z, _LOG_SINH_SWITCH))),
    )
    return out if out.ndim else float(out)


def coth2(theta: float) -> float:
    """coth(2 theta) for theta > 0."""
    if theta < _THETA_TINY:
        return 1.0 / (2.0 * theta) + 2.0 * theta / 3.0
    return 1.0 / math.tanh(2.0 * theta)


def csch2(theta: float) -> float:
    """1/sinh(2 theta) for theta > 0."""
    if theta < _THETA_TINY:
        return 1.0 / (2.0 * theta) - theta / 3.0
    if theta > _LOG_SINH_SWITCH:
        e = math.exp(-2.0 * theta)
        return 2.0 * e / (1.0 - e * e)
    return 1.0 / math.sinh(2.0 * theta)


@dataclass(frozen=True)
class KernelEvaluator:
    """Immutable closed-form log-kernel evaluator for one rate and window.

    The kind is derived from the spectral data: all eigenvalues zero with
    no affine part gives ``heat``; no affine part gives ``quadratic``;
    anything else is ``affine``.
    """

    dec: SpectralData
    window: TimeWindow
    sigma_affine: int = AFFINE_SIGN

    def __post_init__(self):
        if self.sigma_affine not in (-1, 1):
            raise ValueError("sigma_affine must be +1 or -1")

    @property
    def kind(self) -> str:
        if self.dec.is_affine:
            return "affine"
        if np.all(self.dec.lambdas <= TOL_EIG):
            return "heat"
        return "quadratic"

    @property
    def tau(self) -> float:
        return self.window.tau

    def log_kernel(self, x, y):
        """Log kernel in modal coordinates, dispatched on kind."""
        kind = self.kind
        if kind == "heat":
            return log_kernel_heat(x, y, self.tau)
        if kind == "quadratic":
            return log_kernel_quadratic(self, x, y)
        return log_kernel_affine(self, x, y)

    def log_kernel_original(self, z_x, z_y):
        return log_kernel_original_coords(self, z_x, z_y)


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if y.ndim == 0:
        y = y.reshape(1)
    if x.shape[-1] != y.shape[-1]:
        raise DimensionMismatchError("x and y must have equal dimension")
    return x, y


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if tau <= 0.0:
        raise NonpositiveTimeError(
            "kernel evaluation needs t > t0; at t = t0 the kernel "
            "degenerates to a Dirac delta"
        )
    return tau


def _coord_log_heat(x, y, tau):
    d = x - y
    return -0.5 * math.log(4.0 * math.pi * tau) - d * d / (4.0 * tau)


def _coord_log_quad(lam, x, y, tau):
    rl = math.sqrt(lam)
    theta = rl * tau
    pre = 0.25 * math.log(lam) - 0.5 * (_LOG_2PI + log_sinh(2.0 * theta))
    return pre - 0.5 * rl * (x * x + y * y) * coth2(theta) + rl * x * y * csch2(theta)


def log_kernel_heat(x, y, tau: float):
    """Heat log kernel -(n/2) log(4 pi tau) - |x - y|^2/(4 tau).

    Accepts points of shape (n,) or batches (..., n); tau must be > 0.
    """
    tau = _check_tau(tau)
    x, y = _check_pair(x, y)
    n = x.shape[-1]
    d = x - y
    out = -0.5 * n * math.log(4.0 * math.pi * tau) - np.sum(d * d, axis=-1) / (4.0 * tau)
    return float(out) if np.ndim(out) == 0 else out


def log_kernel_quadratic(ev: KernelEvaluator, x, y):
    """Log kernel for a pure quadratic rate, modal coordinates.

    Per-coordinate closed form with a heat-limit branch on zero modes.
    """
    tau = _check_tau(ev.tau)
    x, y = _check_pair(x, y)
    if x.shape[-1] != ev.dec.n:
        raise DimensionMismatchError("point dimension mismatch")
    out = np.zeros(np.broadcast(x[..., 0], y[..., 0]).shape)
    for k, lam in enumerate(ev.dec.lambdas):
        if lam <= TOL_EIG:
            out = out + _coord_log_heat(x[..., k], y[..., k], tau)
        else:
            out = out + _coord_log_quad(lam, x[..., k], y[..., k], tau)
    return float(out) if np.ndim(out) == 0 else out


def log_kernel_affine(ev: KernelEvaluator, x, y):
    """Log kernel for an affine-quadratic rate, modal coordinates.

    Adds per mode sigma*(-c_k tau) plus, on positive modes with b_k != 0,
    the shift term -tanh(theta_k) ((b_k/2)(x_k+y_k) + b_k^2/(4 lam)) /
    sqrt(lam).  With b = 0 and s = 0 every correction vanishes and the
    value equals :func:`log_kernel_quadratic` exactly.
    """
    tau = _check_tau(ev.tau)
    x, y = _check_pair(x, y)
    dec = ev.dec
    out = log_kernel_quadratic(ev, x, y)
    corr = ev.sigma_affine * (-tau) * float(np.sum(dec.c))
    out = out + corr
    for k, lam in enumerate(dec.lambdas):
        bk = dec.b[k]
        if lam > TOL_EIG and bk != 0.0:
            rl = math.sqrt(lam)
            shift = (0.5 * bk) * (x[..., k] + y[..., k]) + bk * bk / (4.0 * lam)
            out = out - math.tanh(rl * tau) * shift / rl
    return float(out) if np.ndim(out) == 0 else out


def log_kernel_original_coords(ev: KernelEvaluator, z_x, z_y):
    """Log kernel with both points given in original coordinates."""
    return ev.log_kernel(to_modal(ev.dec, z_x), to_modal(ev.dec, z_y))


def kernel_original_coords(ev: KernelEvaluator, z_x, z_y) -> float:
    """Kernel value (not log) in original coordinates."""
    return math.exp(log_kernel_original_coords(ev, z_x, z_y))


def pairwise_log_kernel(ev: KernelEvaluator, Zx: np.ndarray, Zy: np.ndarray) -> np.ndarray:
    """(M, N) log-kernel matrix between two sets of original-coordinate points.

    Rows of Zx and Zy are points; both are mapped to modal coordinates
    and broadcast against each other.
    """
    Zx = np.atleast_2d(np.asarray(Zx, dtype=float))
    Zy = np.atleast_2d(np.asarray(Zy, dtype=float))
    if Zx.shape[1] != ev.dec.n or Zy.shape[1] != ev.dec.n:
        raise DimensionMismatchError("point dimension mismatch")
    X = Zx @ ev.dec.V.T  # modal coordinates, row per point
    Y = Zy @ ev.dec.V.T
    return ev.log_kernel(X[:, None, :], Y[None, :, :])
