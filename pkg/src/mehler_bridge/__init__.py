"""Closed-form kernels for reaction-diffusion semigroups with convex
quadratic rates, their verification oracles, and a Sinkhorn solver for
endpoint-matching problems built on them."""

__version__ = "0.1.0"

from .errors import (
    AmbiguousSignError,
    ConfigError,
    CostGuardError,
    DegenerateCouplingError,
    DimensionMismatchError,
    MehlerBridgeError,
    NonSymmetricError,
    NonpositiveTimeError,
    NotConvergedError,
    NotPSDError,
    SingularAffineModeError,
    TruncationWarning,
    UnsupportedOrderError,
)
from .spectral import QuadraticRate, SpectralData, decompose, from_modal, to_modal
from .weyl import (
    AFFINE_SIGN,
    SymbolCoefficients,
    SymbolPoint,
    TimeWindow,
    beta_closed,
    log_alpha_closed,
    poisson_bracket_j,
    symbol_h,
    symbol_pde_residual,
    symbol_q,
)
from .kernels import (
    KernelEvaluator,
    kernel_original_coords,
    log_kernel_affine,
    log_kernel_heat,
    log_kernel_quadratic,
)
from .quadrature import Field, Grid, integrate, propagate, symbol_to_kernel_numeric
from .verify import (
    CheckResult,
    VerificationReport,
    check_chapman_kolmogorov,
    check_delta_ic,
    check_pde_residual,
    check_reductions,
    check_shift_identity,
    resolve_affine_sign,
    run_default_suite,
)
from .bridge import (
    BridgeProblem,
    BridgeSolution,
    build_kernel_matrix,
    interpolate_marginal,
    sinkhorn_solve,
)

__all__ = [
    "__version__",
    "AFFINE_SIGN",
    "AmbiguousSignError",
    "BridgeProblem",
    "BridgeSolution",
    "CheckResult",
    "ConfigError",
    "CostGuardError",
    "DegenerateCouplingError",
    "DimensionMismatchError",
    "Field",
    "Grid",
    "KernelEvaluator",
    "MehlerBridgeError",
    "NonSymmetricError",
    "NonpositiveTimeError",
    "NotConvergedError",
    "NotPSDError",
    "QuadraticRate",
    "SingularAffineModeError",
    "SpectralData",
    "SymbolCoefficients",
    "SymbolPoint",
    "TimeWindow",
    "TruncationWarning",
    "UnsupportedOrderError",
    "VerificationReport",
    "beta_closed",
    "build_kernel_matrix",
    "check_chapman_kolmogorov",
    "check_delta_ic",
    "check_pde_residual",
    "check_reductions",
    "check_shift_identity",
    "decompose",
    "from_modal",
    "integrate",
    "interpolate_marginal",
    "kernel_original_coords",
    "log_alpha_closed",
    "log_kernel_affine",
    "log_kernel_heat",
    "log_kernel_quadratic",
    "poisson_bracket_j",
    "propagate",
    "resolve_affine_sign",
    "run_default_suite",
    "sinkhorn_solve",
    "symbol_h",
    "symbol_pde_residual",
    "symbol_q",
    "symbol_to_kernel_numeric",
    "to_modal",
]
