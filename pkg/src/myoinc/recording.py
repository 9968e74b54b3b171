"""Multi-channel recordings and their on-disk formats.

Binary (``MYO1``, little-endian): magic, u16 version, u32 sample rate,
u16 channels, u64 samples per channel, f32 samples channel-major, u32 trial
count, then per trial u32 start, u32 end, u16 label id, u16-length-prefixed
UTF-8 label name.

CSV: header ``t,ch0,...,chN,label``; ``t`` in seconds, ``label`` is
``<id>:<name>`` inside a trial and empty outside. Trials are recovered as
maximal runs of one label, so back-to-back trials of the same label need a
gap between them to survive a CSV round trip.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from myoinc.errors import (
    BadMagicError,
    DataError,
    FormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from myoinc.labels import MotionLabel

MAGIC = b"MYO1"
VERSION = 1


@dataclass(frozen=True)
class Trial:
    start_index: int
    end_index: int  # exclusive
    label: MotionLabel

    @property
    def length(self) -> int:
        return self.end_index - self.start_index


@dataclass(eq=False)
class Recording:
    sample_rate: int
    channel_count: int
    samples: np.ndarray  # (channels, n) float32
    trials: list[Trial]

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 2 or self.samples.shape[0] != self.channel_count:
            raise DataError(
                f"samples shape {self.samples.shape} does not match {self.channel_count} channels"
            )
        prev_end = 0
        for t in self.trials:
            if not 0 <= t.start_index < t.end_index <= self.n_samples:
                raise DataError(f"trial {t} out of bounds for {self.n_samples} samples")
            if t.start_index < prev_end:
                raise DataError(f"trial {t} overlaps or is out of order")
            prev_end = t.end_index

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def labels(self) -> list[MotionLabel]:
        return sorted({t.label for t in self.trials})

    def trials_for(self, label: MotionLabel) -> list[Trial]:
        return [t for t in self.trials if t.label == label]

    def equals(self, other: "Recording") -> bool:
        return (
            self.sample_rate == other.sample_rate
            and self.channel_count == other.channel_count
            and self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
            and self.trials == other.trials
        )


def recording_to_bytes(rec: Recording) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HIHQ", VERSION, int(rec.sample_rate), rec.channel_count, rec.n_samples))
    buf.write(rec.samples.astype("<f4").tobytes())
    buf.write(struct.pack("<I", len(rec.trials)))
    for t in rec.trials:
        name = t.label.name.encode("utf-8")
        buf.write(struct.pack("<IIHH", t.start_index, t.end_index, t.label.id, len(name)))
        buf.write(name)
    return buf.getvalue()


def _take(data: bytes, pos: int, n: int) -> tuple[bytes, int]:
    if pos + n > len(data):
        raise TruncatedFileError(
            f"recording truncated: need {n} bytes at offset {pos}, file has {len(data)}"
        )
    return data[pos:pos + n], pos + n


def recording_from_bytes(data: bytes) -> Recording:
    head, pos = _take(data, 0, 4)
    if head != MAGIC:
        raise BadMagicError("not a recording file (bad magic)")
    raw, pos = _take(data, pos, 2)
    (version,) = struct.unpack("<H", raw)
    if version != VERSION:
        raise VersionMismatchError(f"recording format version {version}, expected {VERSION}")
    raw, pos = _take(data, pos, struct.calcsize("<IHQ"))
    rate, channels, n = struct.unpack("<IHQ", raw)
    raw, pos = _take(data, pos, 4 * channels * n)
    samples = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(channels, n)
    raw, pos = _take(data, pos, 4)
    (n_trials,) = struct.unpack("<I", raw)
    trials = []
    for _ in range(n_trials):
        raw, pos = _take(data, pos, struct.calcsize("<IIHH"))
        start, end, lid, nlen = struct.unpack("<IIHH", raw)
        raw, pos = _take(data, pos, nlen)
        trials.append(Trial(start, end, MotionLabel(lid, raw.decode("utf-8"))))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after trial table")
    return Recording(rate, channels, samples, trials)


def write_recording(rec: Recording, path) -> None:
    Path(path).write_bytes(recording_to_bytes(rec))


def write_recording_csv(rec: Recording, path) -> None:
    labels = np.full(rec.n_samples, "", dtype=object)
    for t in rec.trials:
        labels[t.start_index:t.end_index] = f"{t.label.id}:{t.label.name}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"ch{c}" for c in range(rec.channel_count)] + ["label"])
        cols = rec.samples.T
        for j in range(rec.n_samples):
            # str() of a float32 is the shortest text that round-trips exactly
            w.writerow([f"{j / rec.sample_rate:.6f}"] + [str(v) for v in cols[j]] + [labels[j]])


def read_recording_csv(path, sample_rate: int | None = None) -> Recording:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TruncatedFileError(f"{path}: empty CSV") from None
        if len(header) < 3 or header[0] != "t" or header[-1] != "label":
            raise BadMagicError(f"{path}: expected header t,ch0..chN,label")
        channels = len(header) - 2
        times, rows, labels = [], [], []
        for lineno, row in enumerate(reader, 2):
            if len(row) != channels + 2:
                raise TruncatedFileError(f"{path}:{lineno}: expected {channels + 2} fields")
            times.append(float(row[0]))
            rows.append([np.float32(v) for v in row[1:-1]])
            labels.append(row[-1])
    samples = np.array(rows, dtype=np.float32).reshape(-1, channels).T
    if sample_rate is None:
        if len(times) < 2:
            raise DataError(f"{path}: cannot infer sample rate from {len(times)} rows")
        sample_rate = int(round((len(times) - 1) / (times[-1] - times[0])))
    trials = []
    j = 0
    while j < len(labels):
        if not labels[j]:
            j += 1
            continue
        k = j
        while k < len(labels) and labels[k] == labels[j]:
            k += 1
        lid, _, name = labels[j].partition(":")
        trials.append(Trial(j, k, MotionLabel(int(lid), name)))
        j = k
    return Recording(sample_rate, channels, samples, trials)


def load_recording(path) -> Recording:
    """Load a binary recording, or CSV when the file ends in ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_recording_csv(path)
    return recording_from_bytes(path.read_bytes())
