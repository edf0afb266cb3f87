"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the model."""


class SolverError(RuntimeError):
    """A numerical solver failed to converge or hit a singular system."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapacityError(ValueError):
    """A brute-force instance exceeds the enumeration bounds."""
