"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent snapshot / model / config data."""


class NumericalError(ArithmeticError):
    """A computation diverged or hit a singularity."""
