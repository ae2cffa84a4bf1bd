"""Exception types shared across the package."""


class TgaError(ValueError):
    """Base class for every error raised by tgalab."""


class ConfigError(TgaError):
    """Invalid space, family or run configuration.

    ``field`` names the offending configuration entry when one is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CapExceededError(TgaError):
    """An enumeration would exceed its configured size cap."""
