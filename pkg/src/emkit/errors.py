"""Exception hierarchy shared across the toolkit."""


class EmkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(EmkitError):
    """A parameter vector failed the owning model's validity check."""


class ConfigurationError(EmkitError):
    """A run configuration is inconsistent (unknown variant, bad option, ...)."""


class DegenerateComponentError(EmkitError):
    """A mixture component collapsed (vanishing mass or variance)."""


class DataError(EmkitError):
    """An input data file could not be parsed."""
