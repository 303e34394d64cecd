"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition (domain, shape, range)."""


class NumericalRangeError(ArithmeticError):
    """A requested quantity fell below the supported floating-point range."""
