"""Exception types shared across the package."""


class ZZDetectError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ZZDetectError):
    """Invalid or inconsistent user-supplied data (corpus lines, labels, ...)."""


class FileFormatError(ZZDetectError):
    """A binary file does not conform to its declared format."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class BadVersionError(FileFormatError):
    """File declares a format version this build does not support."""


class TruncatedFileError(FileFormatError):
    """File ended in the middle of a declared record or header."""


class DimensionError(FileFormatError):
    """Embedding file declares a vector dimension other than 512."""


class ConfigMismatchError(FileFormatError):
    """Checkpoint's embedded config conflicts with what the caller expects."""


class NumericsError(ZZDetectError):
    """A forward pass or loss produced non-finite values."""
