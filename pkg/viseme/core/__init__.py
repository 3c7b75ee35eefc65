# Core package initialization
from .config import (
    logger,
    settings,
    AppSettings,
    RunConfig,
    PACKAGE_TITLE,
    PACKAGE_DESCRIPTION,
    PACKAGE_VERSION,
)
from .errors import (
    VisemeError,
    ImageFormatError,
    DimensionMismatchError,
    CoincidentCentersError,
    EmptyTreeError,
    UnknownCodeError,
    FormatVersionError,
    ConfigError,
    InvalidDescriptorError,
)
from .polynomial import PolyModel
from .utils import parallel_map

__all__ = [
    "logger",
    "settings",
    "AppSettings",
    "RunConfig",
    "PACKAGE_TITLE",
    "PACKAGE_DESCRIPTION",
    "PACKAGE_VERSION",
    "VisemeError",
    "ImageFormatError",
    "DimensionMismatchError",
    "CoincidentCentersError",
    "EmptyTreeError",
    "UnknownCodeError",
    "FormatVersionError",
    "ConfigError",
    "InvalidDescriptorError",
    "PolyModel",
    "parallel_map",
]
