"""ATDM features: root-sum-square moments of a window and its discrete
derivatives, combined into PAP, ZCAP, MWL and DBM.

All functions accept a single 1-D window. The ``*_batch`` variants take an
array whose last axis is time and are what the pipeline uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from myoinc.errors import DataError, WindowTooShortError
from myoinc.labels import MotionLabel

#: Absolute floor on m0 and m2 below which a window is treated as silent.
DEGENERATE_EPS = 1e-12

FEATURE_NAMES = ("pap", "zcap", "mwl", "dbm")


@dataclass(frozen=True)
class MomentSet:
    m0: float
    m2: float
    m4: float
    sigma: float  # m4 / m2, squared number-of-peaks surrogate
    theta: float  # m2 / m0, squared zero-crossing surrogate
    degenerate: bool


@dataclass(frozen=True)
class AtdmFeatures:
    pap: float
    zcap: float
    mwl: float
    dbm: float
    degenerate: bool = False

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.pap, self.zcap, self.mwl, self.dbm)


@dataclass
class FeatureVector:
    """Channel-major ``[PAP, ZCAP, MWL, DBM]`` per channel."""

    values: np.ndarray
    label: MotionLabel | None = None
    window_start: int = 0
    degenerate: bool = False

    def __len__(self):
        return len(self.values)


def _as_window(signal, minimum: int) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"expected a 1-D window, got shape {x.shape}")
    if len(x) < minimum:
        raise WindowTooShortError(f"window of {len(x)} samples, need at least {minimum}")
    return x


def difference(signal, n: int = 1) -> np.ndarray:
    """``n``-fold first difference ``y[j] = x[j+1] - x[j]`` (no 1/dt scaling)."""
    if n not in (1, 2):
        raise ValueError(f"difference order must be 1 or 2, got {n}")
    x = _as_window(signal, n + 1)
    return np.diff(x, n=n)


def moments(signal) -> MomentSet:
    x = _as_window(signal, 3)
    d1 = np.diff(x)
    d2 = np.diff(d1)
    m0 = float(np.sqrt(np.dot(x, x)))
    m2 = float(np.sqrt(np.dot(d1, d1)))
    m4 = float(np.sqrt(np.dot(d2, d2)))
    if m0 <= DEGENERATE_EPS or m2 <= DEGENERATE_EPS:
        return MomentSet(m0, m2, m4, 0.0, 0.0, True)
    return MomentSet(m0, m2, m4, m4 / m2, m2 / m0, False)


def atdm(signal) -> AtdmFeatures:
    x = _as_window(signal, 3)
    m = moments(x)
    # a window with non-zero differences but exactly zero curvature (a ramp)
    # has sigma == 0, which would make PAP infinite
    if m.degenerate or m.m4 <= DEGENERATE_EPS:
        return AtdmFeatures(0.0, 0.0, 0.0, 0.0, degenerate=True)
    d1 = np.diff(x)
    mwl = float(np.sum(np.abs(np.diff(d1))))
    return AtdmFeatures(
        pap=m.m0 / m.sigma,
        zcap=m.m0 / m.theta,
        mwl=mwl,
        dbm=m.m0 - m.m2,
    )


def atdm_batch(windows) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`atdm` over leading axes.

    Returns ``(features, degenerate)`` where ``features`` has shape
    ``windows.shape[:-1] + (4,)`` and ``degenerate`` is boolean with shape
    ``windows.shape[:-1]``.
    """
    x = np.asarray(windows, dtype=np.float64)
    if x.shape[-1] < 3:
        raise WindowTooShortError(f"window of {x.shape[-1]} samples, need at least 3")
    d1 = np.diff(x, axis=-1)
    d2 = np.diff(d1, axis=-1)
    m0 = np.sqrt(np.einsum("...i,...i->...", x, x))
    m2 = np.sqrt(np.einsum("...i,...i->...", d1, d1))
    m4 = np.sqrt(np.einsum("...i,...i->...", d2, d2))
    degenerate = (m0 <= DEGENERATE_EPS) | (m2 <= DEGENERATE_EPS) | (m4 <= DEGENERATE_EPS)
    ok = ~degenerate
    # sanitised denominators so the masked-out lanes never divide by zero
    safe_m2 = np.where(ok, m2, 1.0)
    safe_m4 = np.where(ok, m4, 1.0)
    safe_m0 = np.where(ok, m0, 1.0)
    sigma = safe_m4 / safe_m2
    theta = safe_m2 / safe_m0
    out = np.stack(
        [
            safe_m0 / sigma,
            safe_m0 / theta,
            np.sum(np.abs(d2), axis=-1),
            m0 - m2,
        ],
        axis=-1,
    )
    out[degenerate] = 0.0
    return out, degenerate


def feature_vector(window) -> FeatureVector:
    """Concatenate per-channel ATDM features of a :class:`~myoinc.dsp.Window`."""
    samples = np.asarray(window.samples, dtype=np.float64)
    if samples.ndim != 2:
        raise DataError(f"window samples must be (channels, L), got {samples.shape}")
    feats = [atdm(ch) for ch in samples]
    values = np.array([f.as_tuple() for f in feats], dtype=np.float64).ravel()
    return FeatureVector(
        values=values,
        label=window.label,
        window_start=window.start_index,
        degenerate=any(f.degenerate for f in feats),
    )


def feature_matrix(windows) -> tuple[np.ndarray, np.ndarray]:
    """``(n, channels, L)`` windows to ``(n, 4*channels)`` features and a
    per-window degenerate flag (any channel degenerate)."""
    feats, degenerate = atdm_batch(windows)
    n = feats.shape[0]
    return feats.reshape(n, -1), degenerate.any(axis=-1)


def feature_header(channel_count: int) -> list[str]:
    return [f"ch{c}_{name}" for c in range(channel_count) for name in FEATURE_NAMES]


def spectral_moment_oracle(signal, n: int) -> float:
    """Moment of order ``n`` from the DFT power spectrum.

    ``P[k] = |X[k]|^2 / L`` (so ``sum P = sum x^2``) is weighted by
    ``(2 sin(pi k / L))^n``, the exact gain of the first difference. That sum
    equals the *circular* difference energy, so the wrap-around terms that the
    linear difference does not contain are subtracted. Test oracle; the
    transform is an explicit DFT matrix, not an FFT.
    """
    if n not in (0, 2, 4):
        raise ValueError(f"unsupported moment order {n}; use 0, 2 or 4")
    x = _as_window(signal, 3)
    length = len(x)
    k = np.arange(length)
    spectrum = _dft_matrix(length) @ x
    power = (spectrum.real**2 + spectrum.imag**2) / length
    weight = (2 * np.sin(np.pi * k / length)) ** n
    total = float(np.sum(weight * power))
    if n == 2:
        total -= (x[0] - x[-1]) ** 2
    elif n == 4:
        total -= (x[1] - 2 * x[0] + x[-1]) ** 2 + (x[0] - 2 * x[-1] + x[-2]) ** 2
    return float(np.sqrt(max(total, 0.0)))


@lru_cache(maxsize=8)
def _dft_matrix(length: int) -> np.ndarray:
    k = np.arange(length)
    # reduce k*j modulo L before scaling so large products keep full phase precision
    m = np.exp(-2j * np.pi * (np.outer(k, k) % length) / length)
    m.setflags(write=False)
    return m


def baseline_td(signal, threshold: float | None = None) -> dict[str, float]:
    """Classical MAV, WL, ZC and SSC.

    The ZC/SSC threshold defaults to 1% of the window RMS.
    """
    x = _as_window(signal, 3)
    if threshold is None:
        threshold = 0.01 * float(np.sqrt(np.mean(x * x)))
    d = np.diff(x)
    mav = float(np.mean(np.abs(x)))
    wl = float(np.sum(np.abs(d)))
    zc = int(np.sum((x[:-1] * x[1:] < 0) & (np.abs(d) >= threshold)))
    left = x[1:-1] - x[:-2]
    right = x[1:-1] - x[2:]
    ssc = int(np.sum((left * right > 0) & ((np.abs(left) >= threshold) | (np.abs(right) >= threshold))))
    return {"mav": mav, "wl": wl, "zc": zc, "ssc": ssc}
