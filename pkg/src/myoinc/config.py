"""Stream configuration and the flat ``key = value`` config file."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from myoinc.errors import ConfigError


@dataclass(frozen=True)
class BandpassSpec:
    low_hz: float = 10.0
    high_hz: float = 450.0
    order: int = 3


@dataclass(frozen=True)
class NotchSpec:
    center_hz: float = 50.0
    q: float = 30.0


@dataclass(frozen=True)
class StreamConfig:
    """Acquisition and segmentation parameters.

    Window length and shift are in samples; at the default 1000 SPS they are
    the 200 ms / 75 ms analysis frames.
    """

    sample_rate: float = 1000.0
    channel_count: int = 8
    window_len: int = 200
    window_shift: int = 75
    bandpass: BandpassSpec = field(default_factory=BandpassSpec)
    notch: NotchSpec = field(default_factory=NotchSpec)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.channel_count < 1:
            raise ConfigError(f"channel_count must be >= 1, got {self.channel_count}")
        if self.window_len < 3:
            raise ConfigError(f"window_len must be >= 3 samples, got {self.window_len}")
        if not 1 <= self.window_shift <= self.window_len:
            raise ConfigError(
                f"window_shift must be in [1, window_len], got {self.window_shift}"
            )
        bp = self.bandpass
        if not 0 < bp.low_hz < bp.high_hz:
            raise ConfigError(f"invalid band-pass edges {bp.low_hz}..{bp.high_hz} Hz")
        if bp.order < 1:
            raise ConfigError(f"band-pass order must be >= 1, got {bp.order}")
        nyq = self.sample_rate / 2
        if bp.low_hz >= nyq:
            raise ConfigError(f"band-pass low edge {bp.low_hz} Hz at or above Nyquist")
        if not 0 < self.notch.center_hz < nyq:
            raise ConfigError(f"notch centre {self.notch.center_hz} Hz outside (0, fs/2)")
        if self.notch.q <= 0:
            raise ConfigError(f"notch q must be positive, got {self.notch.q}")

    @property
    def shift_seconds(self) -> float:
        return self.window_shift / self.sample_rate

    @property
    def window_seconds(self) -> float:
        return self.window_len / self.sample_rate

    @property
    def feature_dim(self) -> int:
        return 4 * self.channel_count


_DSP_KEYS = {
    "sample_rate",
    "channels",
    "window_len_ms",
    "window_shift_ms",
    "bp_low_hz",
    "bp_high_hz",
    "bp_order",
    "notch_hz",
    "notch_q",
}
# consumed elsewhere (classifier / reporting)
_OTHER_KEYS = {"pooling", "efficacy_mode"}


def read_config_file(path) -> dict[str, str]:
    """Parse a UTF-8 ``key = value`` file. ``#`` starts a comment."""
    entries: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _DSP_KEYS | _OTHER_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        entries[key] = value
    return entries


def config_from_mapping(entries: dict[str, str]) -> StreamConfig:
    d = StreamConfig()
    try:
        rate = float(entries.get("sample_rate", d.sample_rate))
        win_ms = float(entries.get("window_len_ms", d.window_len * 1000 / d.sample_rate))
        shift_ms = float(
            entries.get("window_shift_ms", d.window_shift * 1000 / d.sample_rate)
        )
        return StreamConfig(
            sample_rate=rate,
            channel_count=int(entries.get("channels", d.channel_count)),
            window_len=int(round(win_ms * rate / 1000)),
            window_shift=int(round(shift_ms * rate / 1000)),
            bandpass=BandpassSpec(
                float(entries.get("bp_low_hz", d.bandpass.low_hz)),
                float(entries.get("bp_high_hz", d.bandpass.high_hz)),
                int(entries.get("bp_order", d.bandpass.order)),
            ),
            notch=NotchSpec(
                float(entries.get("notch_hz", d.notch.center_hz)),
                float(entries.get("notch_q", d.notch.q)),
            ),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config value: {exc}") from exc


def load_config(path=None) -> StreamConfig:
    if path is None:
        return StreamConfig()
    return config_from_mapping(read_config_file(path))
