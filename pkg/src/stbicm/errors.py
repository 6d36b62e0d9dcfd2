"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions, divisibility violations or malformed inputs."""


class ResourceError(RuntimeError):
    """A computation would exceed a configured size or memory cap."""
