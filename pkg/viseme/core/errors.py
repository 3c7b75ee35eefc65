class VisemeError(Exception):
    """Base class for errors raised by a pipeline stage."""


class ImageFormatError(VisemeError, ValueError):
    """Malformed header, out-of-range sample or truncated payload."""


class DimensionMismatchError(VisemeError, ValueError):
    pass


class CoincidentCentersError(VisemeError, ValueError):
    pass


class EmptyTreeError(VisemeError):
    pass


class UnknownCodeError(VisemeError, KeyError):
    """A letter, word, cell or node id that cannot be resolved."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class FormatVersionError(VisemeError):
    """Bad magic, unsupported version or digest mismatch between files."""


class ConfigError(VisemeError, ValueError):
    pass


class InvalidDescriptorError(VisemeError, ValueError):
    """Descriptor with non-finite values."""
