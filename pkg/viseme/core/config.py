import logging
from pathlib import Path
from typing import Literal, Optional, Tuple, Type, Union

from pydantic import Field
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Package metadata
PACKAGE_TITLE = "viseme"
PACKAGE_DESCRIPTION = "Self-descriptive visual coding: piecewise-regular segmentation, invariant shape descriptors, visual alphabets and Hilbert-ordered sentences."
PACKAGE_VERSION = "1.0.0"

# File format tags
TREE_FORMAT = "viseme-tree/1"
DESCRIPTORS_FORMAT = "viseme-descriptors/1"
ALPHABET_FORMAT = "viseme-alphabet/1"
DICTIONARY_FORMAT = "viseme-dictionary/1"
SENTENCE_FORMAT = "viseme-sentence/1"


class AppSettings(BaseSettings):
    THREADS: int = Field(default=1, ge=1)
    LOG_LEVEL: str = "info"

    # Process-wide knobs come from VISEME_* variables or a local .env file
    model_config = SettingsConfigDict(
        env_prefix="VISEME_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


class RunConfig(BaseSettings):
    """
    Parameters of one pipeline run.

    Values come from keyword overrides (command-line flags) first and then
    from an optional key=value file; environment variables are not consulted.
    """
    precision: float = Field(default=2.0, ge=0.0)
    min_card: int = Field(default=8, ge=6)
    lsq_aggregation: bool = True
    vq_bits: int = Field(default=4, ge=1, le=12)
    profile: Literal["full", "convex-hull"] = "full"
    clamp: float = Field(default=2.0, gt=0.0)
    mask_bits: int = Field(default=6, ge=1, le=10)
    include_compounds: bool = False
    include_degenerate: bool = True
    out: str = "out"
    seed: int = 0

    model_config = SettingsConfigDict(extra="forbid", env_file=None)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, dotenv_settings)

    @classmethod
    def from_file(cls, path: Optional[Union[str, Path]] = None, **overrides) -> "RunConfig":
        """
        Load a run configuration from a key=value file.

        Args:
            path: Config file, or None for defaults only
            **overrides: Values that win over the file (flags)

        Returns:
            RunConfig
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if path is None:
            return cls(**overrides)
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        logger.info(f"Reading run config from {path}")
        return cls(_env_file=str(path), **overrides)

    def to_lines(self) -> str:
        lines = []
        for key, value in self.model_dump().items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_file(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_lines(), encoding="utf-8")
        return path


settings = AppSettings()

# Clear existing handlers if any, so the level from settings takes effect
if logging.root.handlers:
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

log_level_upper = settings.LOG_LEVEL.upper()
logging.basicConfig(level=log_level_upper,
                    format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

logger.debug(
    f"Settings loaded: THREADS={settings.THREADS}, LOG_LEVEL={log_level_upper}")
