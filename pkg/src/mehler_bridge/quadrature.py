"""Tensor-product grids, trapezoid quadrature, and kernel-based propagation.

Grids are uniform on a truncated box [-L_1, L_1] x ... x [-L_n, L_n] with
an odd node count per axis so the origin is always a node.  The same
grids feed integration, the numerical symbol-to-kernel transform, data
propagation, and the Sinkhorn solver.
"""

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import CostGuardError, DimensionMismatchError, TruncationWarning
from .kernels import KernelEvaluator, pairwise_log_kernel
from .spectral import QuadraticRate, SpectralData, decompose
from .weyl import TimeWindow, symbol_values
from ._threads import run_row_blocks

__all__ = [
    "Grid",
    "Field",
    "integrate",
    "symbol_to_kernel_numeric",
    "SymbolKernelResult",
    "propagate",
    "MAX_GRID_POINTS",
    "MAX_PROPAGATE_POINTS",
]

MAX_GRID_POINTS = 10**7
MAX_PROPAGATE_POINTS = 10**5
MAX_PROPAGATE_SIDE = 10**4


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid on a symmetric box.

    Parameters
    ----------
    half_widths : tuple of float
        Per-dimension half width L_k > 0.
    counts : tuple of int
        Per-dimension node count, odd and >= 3.
    """

    half_widths: tuple
    counts: tuple

    def __post_init__(self):
        hw = tuple(float(v) for v in np.atleast_1d(self.half_widths))
        cts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if len(hw) != len(cts) or not hw:
            raise DimensionMismatchError("half_widths and counts must align")
        for L, m in zip(hw, cts):
            if L <= 0:
                raise ValueError(f"half width must be positive, got {L}")
            if m < 3 or m % 2 == 0:
                raise ValueError(f"node count must be odd and >= 3, got {m}")
        total = math.prod(cts)
        if total > MAX_GRID_POINTS:
            raise CostGuardError(f"{total} grid points exceeds {MAX_GRID_POINTS}")
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "counts", cts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def total_points(self) -> int:
        return math.prod(self.counts)

    @property
    def spacings(self) -> tuple:
        return tuple(2.0 * L / (m - 1) for L, m in zip(self.half_widths, self.counts))

    @cached_property
    def axes(self) -> tuple:
        return tuple(
            np.linspace(-L, L, m) for L, m in zip(self.half_widths, self.counts)
        )

    @cached_property
    def axis_weights(self) -> tuple:
        """Per-axis trapezoid weights (h at interior nodes, h/2 at ends)."""
        out = []
        for h, m in zip(self.spacings, self.counts):
            w = np.full(m, h)
            w[0] = w[-1] = 0.5 * h
            out.append(w)
        return tuple(out)

    def nodes(self) -> np.ndarray:
        """All grid points as an (M, n) array, row-major axis order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    def weight_vector(self) -> np.ndarray:
        """Tensor-product trapezoid weights aligned with :meth:`nodes`."""
        w = self.axis_weights[0]
        for wk in self.axis_weights[1:]:
            w = np.multiply.outer(w, wk)
        return w.reshape(-1)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.half_widths == other.half_widths
            and self.counts == other.counts
        )

    def __hash__(self):
        return hash((self.half_widths, self.counts))


@dataclass(frozen=True)
class Field:
    """Scalar samples on a grid, stored row-major."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.grid.total_points:
            raise DimensionMismatchError(
                f"expected {self.grid.total_points} values, got {v.shape[0]}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def integrate(f: Field) -> float:
    """Tensor-product trapezoid integral of a field."""
    acc = f.values.reshape(f.grid.counts)
    for w in f.grid.axis_weights:
        acc = np.tensordot(w, acc, axes=([0], [0]))
    return float(acc)


class SymbolKernelResult(NamedTuple):
    """Fourier-inversion value plus the odd-part diagnostic."""

    value: float
    sine_residual: float


def symbol_to_kernel_numeric(
    dec: SpectralData,
    w: TimeWindow,
    x,
    y,
    xi_grid: Grid,
) -> SymbolKernelResult:
    """Kernel value by numerical Fourier inversion of the symbol.

    Computes (2 pi)^-n times the trapezoid approximation of the integral
    of h((x+y)/2, xi) cos(<x - y, xi>) over the xi box.  The companion
    sine integral vanishes for symbols even in xi and is returned as a
    diagnostic.  Guarded to n <= 2; a TruncationWarning is issued when
    the symbol has not decayed at the xi boundary.
    """
    if dec.n > 2:
        raise CostGuardError("numerical inversion supported for n <= 2 only")
    if xi_grid.dim != dec.n:
        raise DimensionMismatchError("xi grid dimension mismatch")
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != dec.n or y.shape[0] != dec.n:
        raise DimensionMismatchError("probe dimension mismatch")

    xi = xi_grid.nodes()
    mid = 0.5 * (x + y)
    h_vals = symbol_values(dec, mid, xi, w)

    h_max = float(np.max(np.abs(h_vals)))
    boundary = np.zeros(xi.shape[0], dtype=bool)
    for k, L in enumerate(xi_grid.half_widths):
        boundary |= np.abs(np.abs(xi[:, k]) - L) == 0.0
    h_bound = float(np.max(np.abs(h_vals[boundary]))) if h_max > 0 else 0.0
    if h_max > 0 and h_bound > 1e-12 * h_max:
        warnings.warn(
            f"symbol magnitude {h_bound:.3e} at the xi boundary exceeds "
            f"1e-12 of its maximum {h_max:.3e}; enlarge the xi box",
            TruncationWarning,
            stacklevel=2,
        )

    phase = xi @ (x - y)
    wts = xi_grid.weight_vector()
    scale = (2.0 * math.pi) ** (-dec.n)
    value = scale * float(np.dot(wts, h_vals * np.cos(phase)))
    sine = scale * float(np.dot(wts, h_vals * np.sin(phase)))
    return SymbolKernelResult(value=value, sine_residual=abs(sine))


def _resample_zero_time(phi0: Field, out_grid: Grid) -> Field:
    if phi0.grid == out_grid:
        return Field(grid=out_grid, values=phi0.values.copy())
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator(
        phi0.grid.axes,
        phi0.values.reshape(phi0.grid.counts),
        method="linear",
        bounds_error=False,
        fill_value=0.0,
    )
    return Field(grid=out_grid, values=interp(out_grid.nodes()))


def propagate(
    phi0: Field,
    rate: QuadraticRate,
    w: TimeWindow,
    out_grid: Grid,
    threads: int = None,
) -> Field:
    """Propagate initial data through the closed-form kernel.

    For tau = 0 the data is returned unchanged (resampled if the grids
    differ).  For tau > 0 the output at each node is the trapezoid sum
    sum_j kappa(z_i, z_j) phi0(z_j) w_j, evaluated in row blocks.
    """
    if phi0.grid.dim != out_grid.dim or phi0.grid.dim != rate.n:
        raise DimensionMismatchError("grid/rate dimensions disagree")
    if w.tau == 0.0:
        return _resample_zero_time(phi0, out_grid)
    if (
        phi0.grid.total_points > MAX_PROPAGATE_POINTS
        or out_grid.total_points > MAX_PROPAGATE_POINTS
        or max(phi0.grid.counts) > MAX_PROPAGATE_SIDE
        or max(out_grid.counts) > MAX_PROPAGATE_SIDE
    ):
        raise CostGuardError("propagation grid exceeds the dense-matvec guard")

    ev = KernelEvaluator(decompose(rate), w)
    src = phi0.grid.nodes()
    dst = out_grid.nodes()
    weighted = phi0.values * phi0.grid.weight_vector()
    out = np.empty(dst.shape[0])

    def fill(i0, i1):
        block = np.exp(pairwise_log_kernel(ev, dst[i0:i1], src))
        out[i0:i1] = block @ weighted

    run_row_blocks(dst.shape[0], fill, threads=threads)
    return Field(grid=out_grid, values=out)
