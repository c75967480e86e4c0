class InvalidInputError(ValueError):
    """Raised when data handed to an operation violates its preconditions."""


class ConfigError(ValueError):
    """Raised for invalid configuration values or unknown config keys."""
