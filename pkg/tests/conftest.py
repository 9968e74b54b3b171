from dataclasses import replace

import numpy as np
import pytest

from myoinc.config import StreamConfig
from myoinc.labels import DEFAULT_LABELS
from myoinc.synth import default_synth_spec, synth_generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def config():
    return StreamConfig()


@pytest.fixture(scope="session")
def small_recording():
    """Six labels, eight trials each, shortened holds: fast but realistic."""
    spec = default_synth_spec(
        7,
        classes=DEFAULT_LABELS[:6],
        amp_matrix=default_synth_spec().amp_matrix[:6],
    )
    spec = replace(spec, envelope=replace(spec.envelope, hold_ms=1500.0))
    return synth_generate(spec, trials_per_class=8)
