"""Exception types shared across the package."""

__all__ = [
    "MehlerBridgeError",
    "DimensionMismatchError",
    "NonSymmetricError",
    "NotPSDError",
    "SingularAffineModeError",
    "NonpositiveTimeError",
    "UnsupportedOrderError",
    "CostGuardError",
    "AmbiguousSignError",
    "NotConvergedError",
    "DegenerateCouplingError",
    "ConfigError",
    "TruncationWarning",
]


class MehlerBridgeError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionMismatchError(MehlerBridgeError):
    """Vector or matrix dimensions are inconsistent."""


class NonSymmetricError(MehlerBridgeError):
    """Reaction curvature matrix fails the symmetry tolerance."""


class NotPSDError(MehlerBridgeError):
    """Reaction curvature matrix has an eigenvalue below -tol_eig."""


class SingularAffineModeError(MehlerBridgeError):
    """A zero eigenmode carries a nonzero linear coefficient.

    The closed-form kernel divides by the modal eigenvalue wherever the
    linear coefficient is nonzero, so this configuration is rejected
    instead of silently extrapolating.
    """


class NonpositiveTimeError(MehlerBridgeError):
    """Kernel evaluation requested at zero or negative elapsed time."""


class UnsupportedOrderError(MehlerBridgeError):
    """Bracket order outside the implemented range (j <= 2)."""


class CostGuardError(MehlerBridgeError):
    """Requested discretization exceeds the desk-scale cost guards."""


class AmbiguousSignError(MehlerBridgeError):
    """Sign resolution found zero or two admissible signs."""


class NotConvergedError(MehlerBridgeError):
    """A fixed-point iteration did not reach its tolerance."""


class DegenerateCouplingError(MehlerBridgeError):
    """Sinkhorn scaling hit an effectively zero kernel application."""


class ConfigError(MehlerBridgeError):
    """Run configuration is malformed or violates the schema."""


class TruncationWarning(UserWarning):
    """An integrand is not negligible at the truncated domain boundary."""
