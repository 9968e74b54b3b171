import warnings
from dataclasses import replace

import numpy as np
import pytest

from myoinc.config import StreamConfig
from myoinc.errors import DataError, ScriptError
from myoinc.labels import DEFAULT_LABELS
from myoinc.lda import build_pooled
from myoinc.session import (
    RecordingPipeline,
    Session,
    SessionScript,
    incremental_script,
    profile_latency,
    run_session,
)
from myoinc.synth import default_synth_spec, synth_generate


class TestScript:
    def test_parse(self):
        s = SessionScript.parse("train rest 5\n# comment\nadd hand_open 3\ntest rest,hand_open 2\n")
        assert [(p.kind, p.labels, p.trials) for p in s.phases] == [
            ("train", ("rest",), 5), ("add", ("hand_open",), 3), ("test", ("rest", "hand_open"), 2)]

    @pytest.mark.parametrize("text", ["", "fit rest 3", "train rest", "train rest x",
                                      "train a,b 3", "test rest 0"])
    def test_malformed(self, text):
        with pytest.raises(ScriptError):
            SessionScript.parse(text)

    def test_untrained_test_label(self, small_recording, config):
        script = SessionScript.parse("train rest 4\ntrain hand_open 4\ntest rest,hand_close 2\n")
        with pytest.raises(ScriptError):
            run_session(script, small_recording, config)

    def test_unknown_label(self, small_recording, config):
        with pytest.raises(ScriptError):
            run_session(SessionScript.parse("train nope 3\n"), small_recording, config)

    def test_too_many_trials(self, small_recording, config):
        with pytest.raises(ScriptError):
            run_session(SessionScript.parse("train rest 99\ntrain hand_open 2\n"), small_recording, config)


class TestPipeline:
    def test_windows_inside_trials(self, small_recording, config):
        pipe = RecordingPipeline(small_recording, config)
        for t in small_recording.trials[:6]:
            starts = pipe.trial_starts(t)
            assert np.all(starts % 75 == 0)
            assert starts[0] >= t.start_index and starts[-1] + 200 <= t.end_index
            assert starts[0] - 75 < t.start_index and starts[-1] + 75 + 200 > t.end_index

    def test_features_match_streaming_frontend(self, small_recording, config):
        from myoinc.dsp import FrontEnd
        from myoinc.features import feature_vector

        pipe = RecordingPipeline(small_recording, config)
        trial = small_recording.trials[2]
        offline = pipe.trial_features(trial)
        fe = FrontEnd(config)
        wins = fe.feed(small_recording.samples[:, :trial.end_index].astype(float))
        by_start = {w.start_index: w for w in wins}
        for st, row in zip(offline.starts, offline.features):
            np.testing.assert_allclose(feature_vector(by_start[int(st)]).values, row, rtol=1e-9)

    def test_rate_mismatch(self, small_recording):
        with pytest.raises(DataError):
            RecordingPipeline(small_recording, StreamConfig(sample_rate=2000))


class TestSession:
    def test_four_class_perfect(self, small_recording, config):
        labels = [lab.name for lab in small_recording.labels[:4]]
        script = incremental_script(labels, initial=4, train_trials=5, test_trials=3)
        res = run_session(script, small_recording, config)
        assert res.tests[0].report.mc_percent == 100.0
        assert res.confusion.counts.sum() == len(res.tests[0].report.outcomes)

    def test_add_class_matches_batch(self, small_recording, config):
        labels = small_recording.labels
        inc = run_session(incremental_script(labels, initial=2, train_trials=5, test_trials=3),
                          small_recording, config)
        text = "".join(f"train {lab.name} 5\n" for lab in labels)
        text += "test " + ",".join(lab.name for lab in labels) + " 3\n"
        batch = run_session(SessionScript.parse(text), small_recording, config)
        assert np.array_equal(inc.model.pooled_cov, batch.model.pooled_cov)
        assert inc.tests[-1].to_dict() == batch.tests[-1].to_dict()

    def test_add_purity(self, small_recording, config):
        session = Session(RecordingPipeline(small_recording, config))
        labs = small_recording.labels
        session.train(labs[0], 4)
        session.train(labs[1], 4)
        before = [(c.mean.tobytes(), c.cov.tobytes()) for c in session.model.classes]
        session.add(labs[2], 4)
        after = [(c.mean.tobytes(), c.cov.tobytes()) for c in session.model.classes[:2]]
        assert before == after

    def test_deterministic_report(self, small_recording, config):
        script = incremental_script(small_recording.labels, initial=3, train_trials=5, test_trials=3)
        a = run_session(script, small_recording, config).report_text()
        b = run_session(script, small_recording, config).report_text()
        assert a == b

    def test_speed_weighted_not_above_literal(self, small_recording, config):
        script = incremental_script(small_recording.labels, initial=4, train_trials=5, test_trials=3,
                                    test_each_step=False)
        lit = run_session(script, small_recording, config, efficacy_mode="literal")
        sw = run_session(script, small_recording, config, efficacy_mode="speed-weighted")
        assert sw.tests[-1].report.efficacy_percent <= lit.tests[-1].report.efficacy_percent
        assert 0 < sw.tests[-1].report.efficacy_percent

    def test_few_windows_warns(self, config):
        spec = default_synth_spec(5, classes=DEFAULT_LABELS[:2], amp_matrix=default_synth_spec().amp_matrix[:2])
        spec = replace(spec, envelope=replace(spec.envelope, hold_ms=500.0))
        rec = synth_generate(spec, 3)
        with pytest.warns(UserWarning, match="d\\+1"):
            run_session(SessionScript.parse("train rest 1\ntrain hand_open 1\n"), rec, config)

    def test_zero_amplitude_completes(self, config):
        spec = default_synth_spec(
            1, classes=DEFAULT_LABELS[:2], amp_matrix=((0.0,) * 8, (0.0,) * 8), noise_floor=0.0)
        spec = replace(spec, envelope=replace(spec.envelope, hold_ms=600.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rec = synth_generate(spec, 2)
            res = run_session(SessionScript.parse("train rest 1\ntrain hand_open 1\ntest rest,hand_open 1\n"),
                              rec, config)
        t = res.tests[0]
        assert t.degenerate_windows == len(t.report.outcomes) > 0
        assert np.isfinite(t.report.mc_percent)

    def test_weighted_pooling(self, small_recording, config):
        script = incremental_script(small_recording.labels, initial=3, train_trials=5, test_trials=3)
        res = run_session(script, small_recording, config, pooling="weighted")
        assert res.model.pooling == "weighted"
        classes = res.model.classes
        np.testing.assert_allclose(res.model.pooled_cov, build_pooled(classes, "weighted").pooled_cov,
                                   rtol=1e-10)


class TestProfile:
    def test_report_shape(self, small_recording, config):
        rep = profile_latency(config, small_recording, max_windows=150)
        assert set(rep["stage_mean_ms"]) == {"buffering", "filtering", "feature_extraction", "prediction"}
        assert all(v >= 0 for v in rep["stage_mean_ms"].values())
        assert rep["windows"] >= 100
        assert rep["embedded_reference_ms"]["feature_extraction"] == 90.88

    def test_too_short(self, config):
        rec = synth_generate(default_synth_spec(1, classes=DEFAULT_LABELS[:2],
                                                amp_matrix=default_synth_spec().amp_matrix[:2],
                                                trial_gain_sd=0.0), 1)
        rec.samples = rec.samples[:, :5000]
        rec.trials = []
        with pytest.raises(DataError):
            profile_latency(config, rec)
