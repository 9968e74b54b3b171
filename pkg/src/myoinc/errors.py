"""Exception hierarchy.

Everything raised deliberately by the package derives from ``MyoincError`` so
the CLI can map it to a data/model exit status.
"""


class MyoincError(Exception):
    pass


class ConfigError(MyoincError, ValueError):
    """Invalid stream, filter or synthesis configuration."""


class DimensionError(MyoincError, ValueError):
    """Array shape does not match the configured layout."""


class DataError(MyoincError, ValueError):
    """Input data is unusable (too short, empty, insufficient samples)."""


class WindowTooShortError(DataError):
    pass


class FormatError(MyoincError):
    """Malformed recording or model file."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class ModelError(MyoincError, ValueError):
    """Inconsistent classifier model (duplicate labels, wrong dimension)."""


class SingularModelError(ModelError):
    pass


class CalibrationError(MyoincError, ValueError):
    pass


class ScriptError(MyoincError, ValueError):
    """Session script references labels or data that do not exist."""
