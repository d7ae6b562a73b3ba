"""Discrete endpoint-matching by Sinkhorn iteration on the kernel matrix.

The closed-form kernel over the full window, with trapezoid weights
folded in, couples the two endpoint densities.  Alternating diagonal
scaling enforces both marginals; the scaled factors are the discrete
analogues of the positive factors whose product gives the bridge
marginals, so interpolation at an intermediate time is two kernel
applications and a pointwise product.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    CostGuardError,
    DegenerateCouplingError,
    DimensionMismatchError,
    NotConvergedError,
)
from .kernels import KernelEvaluator, pairwise_log_kernel
from .quadrature import Field, Grid, MAX_PROPAGATE_POINTS, integrate
from .spectral import QuadraticRate, decompose
from .weyl import AFFINE_SIGN, TimeWindow
from ._threads import run_row_blocks

__all__ = [
    "BridgeProblem",
    "BridgeSolution",
    "KernelOperator",
    "build_kernel_matrix",
    "sinkhorn_solve",
    "interpolate_marginal",
    "InterpolatedMarginal",
]

_DENSE_ENTRY_LIMIT = 10**8
_UNDERFLOW_FLOOR = 1e-300

# Endpoint densities must have decayed at the truncated boundary relative
# to their peak; a unit Gaussian centered 6 sigma from the box edge sits
# at ~1.5e-8, so the guard is placed an order of magnitude above that.
_BOUNDARY_DECAY = 1e-7


@dataclass(frozen=True)
class BridgeProblem:
    """Endpoint densities, reaction rate, window, and solver knobs.

    Both densities live on the shared grid, must be nonnegative with
    trapezoid mass 1 within 1e-9, and must have decayed at the grid
    boundary (values <= 1e-7 of their maximum).
    """

    grid: Grid
    rho0: Field
    rho1: Field
    rate: QuadraticRate
    window: TimeWindow
    tol: float = 1e-8
    max_iter: int = 5000

    def __post_init__(self):
        if self.rho0.grid != self.grid or self.rho1.grid != self.grid:
            raise DimensionMismatchError("endpoint fields must share the grid")
        if self.grid.dim != self.rate.n:
            raise DimensionMismatchError("grid/rate dimensions disagree")
        if self.window.tau <= 0:
            raise ValueError("bridge window needs tau > 0")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        boundary = _boundary_mask(self.grid)
        for label, rho in (("rho0", self.rho0), ("rho1", self.rho1)):
            v = rho.values
            if np.any(v < 0):
                raise ValueError(f"{label} must be nonnegative")
            mass = integrate(rho)
            if abs(mass - 1.0) > 1e-9:
                raise ValueError(f"{label} trapezoid mass {mass!r} is not 1")
            vmax = float(v.max())
            if vmax > 0 and float(v[boundary].max()) > _BOUNDARY_DECAY * vmax:
                raise ValueError(f"{label} has not decayed at the grid boundary")


def _boundary_mask(grid: Grid) -> np.ndarray:
    nodes = grid.nodes()
    mask = np.zeros(nodes.shape[0], dtype=bool)
    for k, L in enumerate(grid.half_widths):
        mask |= np.abs(np.abs(nodes[:, k]) - L) == 0.0
    return mask


@dataclass(frozen=True)
class BridgeSolution:
    """Scaling factors, residual trace, and convergence status."""

    a: Field
    b: Field
    residual_history: np.ndarray
    iterations: int
    converged: bool

    def __post_init__(self):
        h = np.array(self.residual_history, dtype=float)
        h.flags.writeable = False
        object.__setattr__(self, "residual_history", h)


class KernelOperator:
    """Weighted kernel matrix K_ij = kappa(z_i, z_j) w_j, max-log shifted.

    The unweighted exponential part is symmetric, so transposed products
    reuse the same application.  Matrices up to 1e8 entries are held
    dense; beyond that rows are recomputed in blocks on each product.
    """

    def __init__(self, ev: KernelEvaluator, nodes: np.ndarray, weights: np.ndarray,
                 threads=None):
        self.ev = ev
        self.nodes = nodes
        self.weights = weights
        m = nodes.shape[0]
        self.shape = (m, m)
        self.threads = threads
        self.is_dense = m * m <= _DENSE_ENTRY_LIMIT
        if self.is_dense:
            log_k = np.empty((m, m))

            def fill(i0, i1):
                log_k[i0:i1] = pairwise_log_kernel(ev, nodes[i0:i1], nodes)

            run_row_blocks(m, fill, threads=threads)
            self.log_shift = float(log_k.max())
            self._exp = np.exp(log_k - self.log_shift)
        else:
            self._exp = None
            shift = -math.inf

            def scan(i0, i1):
                nonlocal shift
                shift = max(shift, float(pairwise_log_kernel(ev, nodes[i0:i1], nodes).max()))

            for i0 in range(0, m, 512):
                scan(i0, min(i0 + 512, m))
            self.log_shift = shift

    def _apply_exp(self, v: np.ndarray) -> np.ndarray:
        if self._exp is not None:
            return self._exp @ v
        m = self.shape[0]
        out = np.empty(m)

        def fill(i0, i1):
            block = np.exp(
                pairwise_log_kernel(self.ev, self.nodes[i0:i1], self.nodes)
                - self.log_shift
            )
            out[i0:i1] = block @ v

        run_row_blocks(m, fill, threads=self.threads)
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """K v with the column weights folded in."""
        return self._apply_exp(self.weights * v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """Adjoint application in the weighted inner product.

        The transpose of the integral operator folds the quadrature
        weight on the integration index, (K'v)_j = sum_i kappa_ij w_i
        v_i; with the symmetric kernel this coincides with matvec.
        """
        return self._apply_exp(self.weights * v)

    def row(self, i: int) -> np.ndarray:
        if self._exp is not None:
            return self._exp[i] * self.weights
        log_row = pairwise_log_kernel(self.ev, self.nodes[i : i + 1], self.nodes)[0]
        return np.exp(log_row - self.log_shift) * self.weights

    def to_dense(self) -> np.ndarray:
        if not self.is_dense:
            raise CostGuardError("operator too large to materialize")
        return self._exp * self.weights[None, :]


def build_kernel_matrix(problem: BridgeProblem, threads=None) -> KernelOperator:
    """Kernel coupling matrix for the problem's rate, window, and grid."""
    if problem.grid.total_points > MAX_PROPAGATE_POINTS:
        raise CostGuardError("bridge grid exceeds the kernel-matrix guard")
    ev = KernelEvaluator(decompose(problem.rate), problem.window, AFFINE_SIGN)
    return KernelOperator(
        ev, problem.grid.nodes(), problem.grid.weight_vector(), threads=threads
    )


def _guard_positive(v: np.ndarray, what: str):
    if float(v.min()) < _UNDERFLOW_FLOOR:
        raise DegenerateCouplingError(
            f"{what} has entries below {_UNDERFLOW_FLOOR:g}; the grid or window "
            "leaves endpoints effectively uncoupled"
        )


def sinkhorn_solve(problem: BridgeProblem, threads=None) -> BridgeSolution:
    """Alternating diagonal scaling until both marginals match.

    Updates a <- rho0 / (K b) and b <- rho1 / (K' a); stops when the
    sup-norm marginal residual drops to problem.tol.  Hitting max_iter
    returns a solution flagged converged=False rather than raising.  The
    returned factors are rescaled to undo the operator's max-log shift,
    so they satisfy the marginal equations of the unshifted kernel.
    """
    op = build_kernel_matrix(problem, threads=threads)
    rho0 = problem.rho0.values
    rho1 = problem.rho1.values
    m = op.shape[0]
    a = np.ones(m)
    b = np.ones(m)
    history = []
    converged = False
    iterations = 0
    kb = op.matvec(b)
    for it in range(1, problem.max_iter + 1):
        _guard_positive(kb, "K b")
        a = rho0 / kb
        kta = op.rmatvec(a)
        _guard_positive(kta, "K' a")
        b = rho1 / kta
        kb = op.matvec(b)
        residual = max(
            float(np.max(np.abs(a * kb - rho0))),
            float(np.max(np.abs(b * kta - rho1))),
        )
        history.append(residual)
        iterations = it
        if residual <= problem.tol:
            converged = True
            break
    # Undo the max-log shift so (a, b) solve the unshifted-kernel equations,
    # then fix the reciprocal-scaling gauge by balancing the factor masses;
    # the coupling a_i K_ij b_j and all marginals are invariant under both.
    a_phys = a * math.exp(-op.log_shift)
    wts = problem.grid.weight_vector()
    mass_a = float(np.dot(wts, a_phys))
    mass_b = float(np.dot(wts, b))
    if mass_a > 0 and mass_b > 0:
        scale = math.sqrt(mass_b / mass_a)
        a_phys = a_phys * scale
        b = b / scale
    return BridgeSolution(
        a=Field(grid=problem.grid, values=a_phys),
        b=Field(grid=problem.grid, values=b),
        residual_history=np.asarray(history),
        iterations=iterations,
        converged=converged,
    )


class InterpolatedMarginal(NamedTuple):
    field: Field
    renormalization: float


def _weighted_apply(ev, dst, src, weighted, threads=None) -> np.ndarray:
    out = np.empty(dst.shape[0])

    def fill(i0, i1):
        out[i0:i1] = np.exp(pairwise_log_kernel(ev, dst[i0:i1], src)) @ weighted

    run_row_blocks(dst.shape[0], fill, threads=threads)
    return out


def interpolate_marginal(
    problem: BridgeProblem,
    solution: BridgeSolution,
    t_mid: float,
    threads=None,
) -> InterpolatedMarginal:
    """Bridge marginal at an intermediate time.

    rho(t_mid, x) is the product of the forward-propagated first factor
    and the backward-propagated second factor, renormalized to unit
    trapezoid mass.  The renormalization factor is returned; values far
    from 1 indicate an under-resolved grid.  Only converged solutions
    are accepted.
    """
    if not solution.converged:
        raise NotConvergedError("cannot interpolate from an unconverged solution")
    t0, t = problem.window.t0, problem.window.t
    if not (t0 <= t_mid <= t):
        raise ValueError(f"t_mid must lie in [{t0}, {t}]")
    grid = problem.grid
    nodes = grid.nodes()
    wts = grid.weight_vector()
    dec = decompose(problem.rate)
    a = solution.a.values
    b = solution.b.values

    if t_mid == t0:
        ev = KernelEvaluator(dec, problem.window, AFFINE_SIGN)
        vals = a * _weighted_apply(ev, nodes, nodes, wts * b, threads)
    elif t_mid == t:
        ev = KernelEvaluator(dec, problem.window, AFFINE_SIGN)
        vals = _weighted_apply(ev, nodes, nodes, wts * a, threads) * b
    else:
        ev1 = KernelEvaluator(dec, TimeWindow(t0, t_mid), AFFINE_SIGN)
        ev2 = KernelEvaluator(dec, TimeWindow(t_mid, t), AFFINE_SIGN)
        first = _weighted_apply(ev1, nodes, nodes, wts * a, threads)
        second = _weighted_apply(ev2, nodes, nodes, wts * b, threads)
        vals = first * second

    mass = integrate(Field(grid=grid, values=vals))
    if not math.isfinite(mass) or mass <= 0:
        raise DegenerateCouplingError("interpolated marginal has nonpositive mass")
    return InterpolatedMarginal(
        field=Field(grid=grid, values=vals / mass), renormalization=mass
    )
