import numpy as np
import pytest

from myoinc.errors import (
    BadMagicError,
    ConfigError,
    DataError,
    TruncatedFileError,
    VersionMismatchError,
)
from myoinc.labels import DEFAULT_LABELS, MotionLabel
from myoinc.recording import (
    Recording,
    Trial,
    load_recording,
    read_recording_csv,
    recording_from_bytes,
    recording_to_bytes,
    write_recording,
    write_recording_csv,
)
from myoinc.synth import Envelope, SynthSpec, default_synth_spec, synth_generate


def tiny_spec(**kw):
    base = dict(
        seed=3,
        classes=DEFAULT_LABELS[:3],
        amp_matrix=((0.05, 0.05), (1.0, 0.2), (0.2, 1.0)),
        envelope=Envelope(rise_ms=50, hold_ms=400, fall_ms=50, gap_ms=100),
    )
    base.update(kw)
    return SynthSpec(**base)


class TestBinaryFormat:
    def test_round_trip(self, tmp_path):
        rec = synth_generate(tiny_spec(), 3)
        path = tmp_path / "r.myo"
        write_recording(rec, path)
        back = load_recording(path)
        assert back.equals(rec)
        assert recording_to_bytes(back) == path.read_bytes()

    def test_truncated(self):
        blob = recording_to_bytes(synth_generate(tiny_spec(), 1))
        for cut in (3, 10, 200, len(blob) - 1):
            with pytest.raises(TruncatedFileError):
                recording_from_bytes(blob[:cut])

    def test_bad_magic(self):
        blob = recording_to_bytes(synth_generate(tiny_spec(), 1))
        with pytest.raises(BadMagicError):
            recording_from_bytes(b"MYOM" + blob[4:])

    def test_version(self):
        blob = recording_to_bytes(synth_generate(tiny_spec(), 1))
        with pytest.raises(VersionMismatchError):
            recording_from_bytes(blob[:4] + b"\x02\x00" + blob[6:])

    def test_invariants(self):
        lab = MotionLabel(0, "rest")
        with pytest.raises(DataError):
            Recording(1000, 1, np.zeros((1, 10)), [Trial(5, 20, lab)])
        with pytest.raises(DataError):
            Recording(1000, 1, np.zeros((1, 10)), [Trial(4, 8, lab), Trial(2, 6, lab)])
        with pytest.raises(DataError):
            Recording(1000, 2, np.zeros((1, 10)), [])


class TestCsvFormat:
    def test_same_as_binary(self, tmp_path):
        rec = synth_generate(tiny_spec(), 2)
        write_recording(rec, tmp_path / "r.myo")
        write_recording_csv(rec, tmp_path / "r.csv")
        a = load_recording(tmp_path / "r.myo")
        b = load_recording(tmp_path / "r.csv")
        assert b.equals(a)
        assert b.samples.tobytes() == a.samples.tobytes()

    def test_header_checked(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("time,a,b\n0,1,2\n", encoding="utf-8")
        with pytest.raises(BadMagicError):
            read_recording_csv(p)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("t,ch0,label\n0.0,1.0,\n0.001,2.0\n", encoding="utf-8")
        with pytest.raises(TruncatedFileError):
            read_recording_csv(p)


class TestSynth:
    def test_deterministic(self):
        a = synth_generate(tiny_spec(), 3)
        b = synth_generate(tiny_spec(), 3)
        assert recording_to_bytes(a) == recording_to_bytes(b)

    def test_seed_matters(self):
        a = synth_generate(tiny_spec(), 1)
        b = synth_generate(tiny_spec(seed=4), 1)
        assert a.samples.tobytes() != b.samples.tobytes()

    def test_trial_layout(self):
        spec = tiny_spec()
        rec = synth_generate(spec, 2)
        assert len(rec.trials) == 6
        assert [t.label.id for t in rec.trials] == [0, 1, 2, 0, 1, 2]
        assert all(t.length == 400 for t in rec.trials)
        assert rec.trials[0].start_index == 100 + 50

    def test_amplitudes_follow_matrix(self):
        spec = tiny_spec(noise_floor=0.0, trial_gain_sd=0.0)
        rec = synth_generate(spec, 4)
        for t in rec.trials:
            seg = rec.samples[:, t.start_index:t.end_index]
            rms = np.sqrt(np.mean(seg.astype(float) ** 2, axis=1))
            row = np.array(spec.amp_matrix[t.label.id])
            np.testing.assert_allclose(rms, row, rtol=0.25)

    def test_schedule(self):
        labs = DEFAULT_LABELS[:3]
        rec = synth_generate(tiny_spec(), schedule=[labs[2], labs[2], labs[0]])
        assert [t.label for t in rec.trials] == [labs[2], labs[2], labs[0]]

    @pytest.mark.parametrize("kw", [
        {"band": (0.0, 100.0)},
        {"band": (100.0, 600.0)},
        {"amp_matrix": ((1.0,), (1.0,))},
        {"amp_matrix": ((1, 1), (1, -1), (2, 2))},
        {"envelope": Envelope(hold_ms=0)},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            synth_generate(tiny_spec(**kw), 1)

    def test_duplicate_rows_warn(self):
        with pytest.warns(UserWarning):
            synth_generate(tiny_spec(amp_matrix=((1, 1), (1, 1), (0.1, 2))), 1)

    def test_default_spec_shape(self):
        spec = default_synth_spec()
        assert len(spec.classes) == 12 and spec.channel_count == 8
        assert spec.seed == 42
        assert len({tuple(r) for r in spec.amp_matrix}) == 12
