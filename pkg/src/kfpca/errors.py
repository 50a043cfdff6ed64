"""Exception types shared across the package."""


class KfpcaError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KfpcaError):
    """A parameter or option is outside its allowed range."""


class InputError(KfpcaError):
    """Input data violates a precondition (size, finiteness, ...)."""


class DimensionError(InputError):
    """Operands live on incompatible grids or have mismatched shapes."""


class EstimationError(KfpcaError):
    """An estimator could not produce a result (degeneracy, non-convergence)."""


class DomainError(KfpcaError):
    """A requested target lies outside the feasible region of a family."""


class ParseError(KfpcaError):
    """A document or file could not be parsed; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path
