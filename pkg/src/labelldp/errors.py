"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Raised when mechanism or experiment parameters fail validation."""


class EnumerationGuardError(RuntimeError):
    """Raised when an exact enumeration would exceed its size guard."""
