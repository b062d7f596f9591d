"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class ConvergenceError(ArithmeticError):
    """A numerical procedure did not reach its tolerance.

    Attributes
    ----------
    estimate : float
        Best value obtained before giving up.
    error : float
        Estimated absolute error of ``estimate`` (``nan`` if unknown).
    iterations : int
        Terms, subdivisions or refinements consumed.
    """

    def __init__(self, message, estimate=float("nan"), error=float("nan"), iterations=0):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.iterations = iterations


class IntegrationError(ConvergenceError):
    """Quadrature failed to meet the requested tolerance."""


class AmbiguityError(ValueError):
    """Two points of a combined constellation coincide."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class GeometryError(ValueError):
    """Decision-region geometry is unsupported or failed its checks."""


class SingularChannelError(ArithmeticError):
    """Channel matrix is numerically rank deficient."""


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
