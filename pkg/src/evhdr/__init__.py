"""Event-guided reconstruction of sharp HDR frames from a blurry LDR image."""

from .errors import ConfigError, InvalidInputError

__version__ = "0.1.0"

# exposure tags of the LDR stack and their normalization factors
EXPOSURES = (-2, 0, 2)
GAINS = {-2: 1.0, 0: 4.0, 2: 16.0}

__all__ = ["ConfigError", "InvalidInputError", "EXPOSURES", "GAINS"]
