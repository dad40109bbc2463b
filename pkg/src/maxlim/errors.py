"""Exception types shared across the package."""


class MaxlimError(Exception):
    """Base class for all package errors."""


class DomainError(MaxlimError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(MaxlimError, ValueError):
    """A model or run configuration is invalid."""


class UnsupportedModelError(MaxlimError):
    """The requested quantity has no computable form for this model."""


class InsufficientDataError(MaxlimError):
    """The sample does not contain enough exceedances or anchors."""
