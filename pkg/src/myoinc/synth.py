"""Seeded synthetic EMG.

Each trial of class ``c`` drives channel ``ch`` with band-limited Gaussian
noise scaled by ``amp_matrix[c][ch]`` and a trapezoidal envelope, on top of
a white noise floor. Only the hold plateau is labelled as the trial; the
rise, fall and inter-trial gap are unlabelled.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

from myoinc.errors import ConfigError
from myoinc.labels import DEFAULT_LABELS, MotionLabel
from myoinc.recording import Recording, Trial

# 11 motions + rest over 8 electrodes (ch0-3 flexor side, ch4-7 extensor side).
DEFAULT_AMP_MATRIX = (
    (0.03, 0.03, 0.03, 0.03, 0.03, 0.03, 0.03, 0.03),  # rest
    (0.10, 0.10, 0.10, 0.10, 1.00, 0.80, 0.30, 0.10),  # hand_open
    (1.00, 0.80, 0.30, 0.10, 0.10, 0.10, 0.10, 0.10),  # hand_close
    (0.30, 1.00, 1.00, 0.20, 0.10, 0.10, 0.10, 0.20),  # wrist_flexion
    (0.10, 0.10, 0.20, 0.10, 0.20, 1.00, 1.00, 0.30),  # wrist_extension
    (0.80, 0.10, 0.10, 0.70, 0.10, 0.10, 0.10, 0.90),  # wrist_pronation
    (0.10, 0.10, 0.90, 0.10, 0.80, 0.10, 0.70, 0.10),  # wrist_supination
    (0.10, 0.70, 0.10, 0.10, 0.10, 0.10, 0.20, 1.00),  # radial_deviation
    (0.10, 0.10, 0.10, 1.00, 0.10, 0.70, 0.10, 0.10),  # ulnar_deviation
    (0.60, 0.10, 0.60, 0.10, 0.60, 0.10, 0.10, 0.10),  # pinch_grip
    (0.10, 0.60, 0.10, 0.60, 0.10, 0.10, 0.60, 0.10),  # key_grip
    (0.10, 0.10, 0.10, 0.10, 0.10, 0.60, 0.10, 0.60),  # index_point
)


@dataclass(frozen=True)
class Envelope:
    rise_ms: float = 250.0
    hold_ms: float = 3000.0
    fall_ms: float = 250.0
    gap_ms: float = 1000.0


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 42
    classes: tuple[MotionLabel, ...] = DEFAULT_LABELS
    amp_matrix: tuple[tuple[float, ...], ...] = DEFAULT_AMP_MATRIX
    band: tuple[float, float] = (20.0, 150.0)
    envelope: Envelope = field(default_factory=Envelope)
    noise_floor: float = 0.005
    sample_rate: int = 1000
    # per-trial log-normal gain spread, models effort variation between repetitions
    trial_gain_sd: float = 0.25

    @property
    def channel_count(self) -> int:
        return len(self.amp_matrix[0]) if self.amp_matrix else 0

    def validate(self) -> None:
        amp = np.asarray(self.amp_matrix, dtype=np.float64)
        if amp.ndim != 2 or amp.shape[0] != len(self.classes) or amp.shape[1] < 1:
            raise ConfigError(
                f"amp_matrix must be classes x channels ({len(self.classes)} x C), got {amp.shape}"
            )
        if np.any(amp < 0) or not np.all(np.isfinite(amp)):
            raise ConfigError("amp_matrix entries must be finite and non-negative")
        if len(np.unique(amp, axis=0)) < len(amp):
            warnings.warn("amp_matrix has identical rows; those classes are indistinguishable",
                          stacklevel=3)
        low, high = self.band
        if not 0 < low < high < self.sample_rate / 2:
            raise ConfigError(f"excitation band {self.band} not inside (0, fs/2)")
        env = self.envelope
        if min(env.rise_ms, env.fall_ms, env.gap_ms) < 0 or env.hold_ms <= 0:
            raise ConfigError(f"invalid envelope {env}")
        if self.noise_floor < 0 or self.trial_gain_sd < 0:
            raise ConfigError("noise_floor and trial_gain_sd must be non-negative")


def default_synth_spec(seed: int = 42, **overrides) -> SynthSpec:
    return SynthSpec(seed=seed, **overrides)


def _ms(ms: float, rate: int) -> int:
    return int(round(ms * rate / 1000))


def _bandlimited(rng, shape, band, rate) -> np.ndarray:
    sos = signal.butter(4, band, btype="bandpass", output="sos", fs=rate)
    # unit output variance for unit white input: divide by the impulse-response energy
    impulse = np.zeros(4096)
    impulse[0] = 1.0
    gain = np.sqrt(np.sum(signal.sosfilt(sos, impulse) ** 2))
    white = rng.standard_normal(shape)
    return signal.sosfilt(sos, white, axis=-1) / gain


def synth_generate(spec: SynthSpec, trials_per_class: int = 30,
                   schedule: Sequence[MotionLabel] | None = None) -> Recording:
    """Render a recording.

    Without ``schedule`` the classes are cycled ``trials_per_class`` times
    (round-robin). ``schedule`` gives the trial order explicitly.
    """
    spec.validate()
    rate = spec.sample_rate
    env = spec.envelope
    rise, hold, fall, gap = (_ms(v, rate) for v in
                             (env.rise_ms, env.hold_ms, env.fall_ms, env.gap_ms))
    if schedule is None:
        schedule = [c for _ in range(trials_per_class) for c in spec.classes]
    row_of = {lab: i for i, lab in enumerate(spec.classes)}
    amp = np.asarray(spec.amp_matrix, dtype=np.float64)
    channels = amp.shape[1]
    per_trial = gap + rise + hold + fall
    n = per_trial * len(schedule) + gap

    rng = np.random.default_rng(spec.seed)
    gains = np.exp(spec.trial_gain_sd * rng.standard_normal(len(schedule)))
    drive = _bandlimited(rng, (channels, n), spec.band, rate)
    floor = spec.noise_floor * rng.standard_normal((channels, n))

    shape = np.concatenate([
        np.linspace(0.0, 1.0, rise, endpoint=False),
        np.ones(hold),
        np.linspace(1.0, 0.0, fall, endpoint=False),
    ])
    modulation = np.zeros((channels, n))
    trials = []
    for i, label in enumerate(schedule):
        if label not in row_of:
            raise ConfigError(f"schedule label {label} not among spec classes")
        start = i * per_trial + gap
        modulation[:, start:start + shape.size] = (
            gains[i] * amp[row_of[label]][:, None] * shape[None, :]
        )
        trials.append(Trial(start + rise, start + rise + hold, label))
    samples = modulation * drive + floor
    return Recording(rate, channels, samples.astype(np.float32), trials)
