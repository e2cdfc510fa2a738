"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: wrong shape, non-Hermitian generator, bad parameter."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its requested accuracy."""
