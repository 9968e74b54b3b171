"""Streaming front end: biquad filter design, per-tick filtering, and the
sample ring buffer that cuts overlapped analysis windows."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from myoinc.config import StreamConfig
from myoinc.errors import ConfigError, DimensionError, MyoincError
from myoinc.labels import MotionLabel

# Upper band edge is pulled back to this fraction of the sample rate when a
# requested edge sits at or beyond Nyquist (bilinear band-pass degenerates there).
CLAMP_FRACTION = 0.495


class FilterClampWarning(UserWarning):
    pass


class BufferOverrunError(MyoincError):
    """Producer overwrote samples the consumer had not windowed yet."""


class BiquadCascade:
    """Cascade of second-order sections with per-channel delay state.

    ``sections`` uses the ``[b0, b1, b2, 1, a1, a2]`` row layout; the state is
    the transposed direct-form II register pair for every section and channel.
    """

    def __init__(self, sections, channel_count: int = 1):
        sos = np.array(sections, dtype=np.float64).reshape(-1, 6)
        if not np.allclose(sos[:, 3], 1.0):
            raise ConfigError("sections must be normalised so that a0 == 1")
        sos[:, 3] = 1.0
        sos.setflags(write=False)
        self.sections = sos
        self.channel_count = int(channel_count)
        self.state = np.zeros((len(sos), self.channel_count, 2))
        if not self.is_stable():
            raise ConfigError("designed cascade has a pole on or outside the unit circle")

    def __len__(self):
        return len(self.sections)

    def __repr__(self):
        return f"BiquadCascade(sections={len(self)}, channels={self.channel_count})"

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(s[3:]) for s in self.sections])

    def zeros(self) -> np.ndarray:
        out = []
        for s in self.sections:
            b = np.trim_zeros(s[:3], "b")
            out.append(np.roots(b) if len(b) > 1 else np.empty(0))
        return np.concatenate(out)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def then(self, other: "BiquadCascade") -> "BiquadCascade":
        """Series connection: ``self`` followed by ``other``; fresh state."""
        if other.channel_count != self.channel_count:
            raise DimensionError("cannot cascade filters built for different channel counts")
        return BiquadCascade(np.vstack([self.sections, other.sections]), self.channel_count)

    def for_channels(self, channel_count: int) -> "BiquadCascade":
        return BiquadCascade(self.sections, channel_count)

    def reset(self) -> None:
        self.state[...] = 0.0

    def transfer_function(self) -> tuple[np.ndarray, np.ndarray]:
        """Expanded numerator/denominator polynomials in z^-1."""
        b = np.array([1.0])
        a = np.array([1.0])
        for s in self.sections:
            b = np.polymul(b, s[:3])
            a = np.polymul(a, s[3:])
        return b, a

    def response(self, freqs_hz, sample_rate: float) -> np.ndarray:
        """Complex frequency response evaluated on the unit circle."""
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sample_rate
        zinv = np.exp(-1j * w)
        h = np.ones_like(zinv)
        for b0, b1, b2, _, a1, a2 in self.sections:
            h = h * (b0 + b1 * zinv + b2 * zinv**2) / (1 + a1 * zinv + a2 * zinv**2)
        return h

    def process(self, frame) -> np.ndarray:
        """Filter one sample tick (one value per channel) and advance the state."""
        x = np.asarray(frame, dtype=np.float64)
        if x.shape != (self.channel_count,):
            raise DimensionError(
                f"frame has shape {x.shape}, expected ({self.channel_count},)"
            )
        z = self.state
        for i, (b0, b1, b2, _, a1, a2) in enumerate(self.sections):
            y = b0 * x + z[i, :, 0]
            z[i, :, 0] = b1 * x - a1 * y + z[i, :, 1]
            z[i, :, 1] = b2 * x - a2 * y
            x = y
        return x

    def process_block(self, block) -> np.ndarray:
        """Filter a ``(channels, n)`` block; equivalent to ``n`` calls of
        :meth:`process` in order."""
        x = np.asarray(block, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != self.channel_count:
            raise DimensionError(
                f"block has shape {x.shape}, expected ({self.channel_count}, n)"
            )
        y, self.state = signal.sosfilt(np.array(self.sections), x, axis=-1, zi=self.state)
        return y

    def format_sections(self, digits: int = 12) -> list[str]:
        fmt = f"{{:.{digits}g}}"
        return [
            " ".join(fmt.format(v) for v in (s[0], s[1], s[2], s[4], s[5]))
            for s in self.sections
        ]


def design_bandpass(sample_rate: float, low_hz: float, high_hz: float, order: int,
                    channel_count: int = 1) -> BiquadCascade:
    """Butterworth band-pass (bilinear transform) as second-order sections.

    ``order`` is the prototype order, so the digital filter has ``2 * order``
    poles. An upper edge at or above Nyquist is clamped to
    ``0.495 * sample_rate`` with a :class:`FilterClampWarning`.
    """
    if not (0 < low_hz < high_hz):
        raise ConfigError(f"invalid band edges {low_hz}..{high_hz} Hz")
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")
    if sample_rate <= 0:
        raise ConfigError(f"sample_rate must be positive, got {sample_rate}")
    if high_hz >= 0.5 * sample_rate:
        clamped = CLAMP_FRACTION * sample_rate
        warnings.warn(
            f"band-pass upper edge {high_hz} Hz >= Nyquist; clamped to {clamped} Hz",
            FilterClampWarning,
            stacklevel=2,
        )
        high_hz = clamped
    if low_hz >= high_hz:
        raise ConfigError(f"low edge {low_hz} Hz not below (clamped) high edge {high_hz} Hz")
    sos = signal.butter(order, [low_hz, high_hz], btype="bandpass", output="sos",
                        fs=sample_rate)
    return BiquadCascade(sos, channel_count)


def design_notch(sample_rate: float, center_hz: float, q: float,
                 channel_count: int = 1) -> BiquadCascade:
    """Second-order notch with zeros exactly on the unit circle at ``center_hz``."""
    if not 0 < center_hz < sample_rate / 2:
        raise ConfigError(f"notch centre {center_hz} Hz outside (0, {sample_rate / 2})")
    if q <= 0:
        raise ConfigError(f"notch q must be positive, got {q}")
    b, a = signal.iirnotch(center_hz, q, fs=sample_rate)
    return BiquadCascade(np.concatenate([b, a]), channel_count)


def design_frontend(config: StreamConfig) -> BiquadCascade:
    """Band-pass cascaded with the mains notch, sized for the configured channels."""
    bp, nt = config.bandpass, config.notch
    c = config.channel_count
    band = design_bandpass(config.sample_rate, bp.low_hz, bp.high_hz, bp.order, c)
    return band.then(design_notch(config.sample_rate, nt.center_hz, nt.q, c))


@dataclass
class Window:
    samples: np.ndarray  # (channels, window_len)
    start_index: int
    label: MotionLabel | None = None


def window_starts(n_samples: int, window_len: int, window_shift: int) -> np.ndarray:
    if n_samples < window_len:
        return np.empty(0, dtype=np.int64)
    count = (n_samples - window_len) // window_shift + 1
    return np.arange(count, dtype=np.int64) * window_shift


def window_view(samples: np.ndarray, window_len: int, window_shift: int) -> np.ndarray:
    """Read-only ``(n_windows, channels, window_len)`` view over a
    ``(channels, n)`` array, same start grid as :class:`RingBuffer`."""
    if samples.shape[1] < window_len:
        return np.empty((0, samples.shape[0], window_len), dtype=samples.dtype)
    view = sliding_window_view(samples, window_len, axis=1)[:, ::window_shift, :]
    return view.transpose(1, 0, 2)


class RingBuffer:
    """Single-producer / single-consumer circular sample store.

    The producer calls :meth:`push`; the consumer calls :meth:`segment`. Only
    the producer moves ``write_index`` and only the consumer moves
    ``next_start``, so the pair needs no lock under CPython as long as each
    side stays on its own thread.
    """

    def __init__(self, channel_count: int, window_len: int, window_shift: int,
                 capacity: int | None = None):
        if capacity is None:
            capacity = 2 * window_len + window_shift
        if capacity < window_len:
            raise ConfigError(f"capacity {capacity} smaller than window_len {window_len}")
        if not 1 <= window_shift <= window_len:
            raise ConfigError("window_shift must be in [1, window_len]")
        self.channel_count = channel_count
        self.window_len = window_len
        self.window_shift = window_shift
        self.capacity = capacity
        self._data = np.zeros((channel_count, capacity))
        self.write_index = 0
        self.next_start = 0

    @classmethod
    def from_config(cls, config: StreamConfig, capacity: int | None = None) -> "RingBuffer":
        return cls(config.channel_count, config.window_len, config.window_shift, capacity)

    def push(self, block) -> None:
        """Append one frame ``(channels,)`` or a block ``(channels, n)``."""
        x = np.asarray(block, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != self.channel_count:
            raise DimensionError(
                f"pushed data has shape {x.shape}, expected ({self.channel_count}, n)"
            )
        n = x.shape[1]
        # samples still needed by the consumer begin at next_start
        oldest_needed = min(self.next_start, self.write_index)
        if self.write_index + n - oldest_needed > self.capacity:
            raise BufferOverrunError(
                f"pushing {n} samples would overwrite unread data (capacity {self.capacity})"
            )
        pos = self.write_index % self.capacity
        first = min(n, self.capacity - pos)
        self._data[:, pos:pos + first] = x[:, :first]
        if first < n:
            self._data[:, :n - first] = x[:, first:]
        self.write_index += n

    def available(self) -> int:
        """Number of complete windows ready to be segmented."""
        ready = self.write_index - self.next_start - self.window_len
        return 0 if ready < 0 else ready // self.window_shift + 1

    def _read(self, start: int) -> np.ndarray:
        idx = (start + np.arange(self.window_len)) % self.capacity
        return self._data[:, idx]

    def segment(self) -> Iterator[Window]:
        """Yield every window that has become complete since the last call."""
        while self.write_index >= self.next_start + self.window_len:
            win = Window(self._read(self.next_start), self.next_start)
            self.next_start += self.window_shift
            yield win


def segment(ring_buffer: RingBuffer) -> list[Window]:
    return list(ring_buffer.segment())


class FrontEnd:
    """Filter + ring buffer for one live stream; one instance per consumer."""

    def __init__(self, config: StreamConfig, capacity: int | None = None):
        self.config = config
        self.cascade = design_frontend(config)
        self.buffer = RingBuffer.from_config(config, capacity)

    def feed(self, block) -> list[Window]:
        """Filter a ``(channels, n)`` block, buffer it, return completed windows.

        ``n`` may be anything; blocks are split so the buffer never overruns.
        """
        x = np.asarray(block, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        out = []
        step = self.config.window_shift
        for i in range(0, x.shape[1], step):
            self.buffer.push(self.cascade.process_block(x[:, i:i + step]))
            out.extend(self.buffer.segment())
        return out


def filter_recording(samples, config: StreamConfig) -> np.ndarray:
    """Whole-stream causal filtering from zero state, ``(channels, n)`` in and out."""
    cascade = design_frontend(config)
    return cascade.process_block(np.asarray(samples, dtype=np.float64))
