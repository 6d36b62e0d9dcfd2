"""Space-time BICM over MIMO block-fading channels: simulation and analysis."""

from .config import SystemConfig, load_config
from .errors import ConfigurationError, ResourceError

__all__ = ["SystemConfig", "load_config", "ConfigurationError", "ResourceError"]
__version__ = "0.1.0"
