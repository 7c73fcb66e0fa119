"""
Exceptions raised by the laboratory. Each one derives from a builtin so
callers may catch broadly (ValueError, RuntimeError, ArithmeticError).
"""


class ConfigError(ValueError):
    """Raised when a configuration value violates a ModelConfig invariant."""


class SingularConfigurationError(ValueError):
    """Raised when a phase-space point leaves the Weyl chamber or falls below the gap floor."""


class IndexRangeError(ValueError):
    """Raised when an observable or family index is outside its declared range."""


class ImaginaryResidueError(ArithmeticError):
    """Raised when a trace that must be real carries an imaginary part above tolerance."""


class DifferentiationError(ArithmeticError):
    """Raised when a dual sweep yields a non-finite derivative."""

    def __init__(self, message: str, coordinate: int):
        super().__init__(message)
        self.coordinate = coordinate


class EigenDecompositionError(RuntimeError):
    """Raised when a Hermitian eigendecomposition does not converge."""


class CollisionError(RuntimeError):
    """Raised when an integrated trajectory reaches the gap floor."""


class StiffnessError(RuntimeError):
    """Raised when the integrator step size underflows."""


class HorizonError(RuntimeError):
    """Raised when a trajectory is too short for asymptotic analysis."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ConventionInconsistencyError(RuntimeError):
    """Raised when the bracket constant cannot be fitted consistently."""


class ConditioningWarning(UserWarning):
    """Emitted when a Lax matrix is inverted with a large condition estimate."""
