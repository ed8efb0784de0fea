class DimensionError(ValueError):
    """Array shapes or lengths do not satisfy an operation's contract."""


class ConfigError(ValueError):
    """A configuration or dataset cannot be used for the requested operation."""
