"""Real-time EMG pattern recognition: streaming DSP, ATDM features,
incrementally extensible LDA, and online evaluation metrics."""

from myoinc.config import StreamConfig, load_config
from myoinc.errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    ModelError,
    MyoincError,
    SingularModelError,
)
from myoinc.labels import DEFAULT_LABELS, MotionLabel

__all__ = [
    "StreamConfig",
    "load_config",
    "MotionLabel",
    "DEFAULT_LABELS",
    "MyoincError",
    "ConfigError",
    "DimensionError",
    "DataError",
    "FormatError",
    "ModelError",
    "SingularModelError",
    "CalibrationError",
]

__version__ = "0.1.0"
