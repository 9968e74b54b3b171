import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from myoinc.errors import CalibrationError, DataError
from myoinc.evaluation import (
    TrialReport,
    WindowOutcome,
    calibrate_reference,
    confusion,
    motion_completion,
    motion_efficacy,
    proportional_speed,
)
from myoinc.labels import MotionLabel

A, B, C = MotionLabel(0, "a"), MotionLabel(1, "b"), MotionLabel(2, "c")


def outcomes(ests, props=None):
    props = props or [1.0] * len(ests)
    return [WindowOutcome(A if e else B, A, p) for e, p in zip(ests, props)]


class TestMotionCompletion:
    def test_all_success(self):
        assert motion_completion(outcomes([1] * 30)) == 100.0

    def test_28_of_30(self):
        assert motion_completion(outcomes([1] * 28 + [0] * 2)) == pytest.approx(93.33333333333333, abs=1e-12)

    def test_none(self):
        assert motion_completion(outcomes([0] * 30)) == 0.0

    def test_empty(self):
        with pytest.raises(DataError):
            motion_completion([])

    @settings(max_examples=100)
    @given(st.lists(st.booleans(), min_size=1, max_size=60))
    def test_bounds_and_monotone(self, ests):
        mc = motion_completion(outcomes(ests))
        assert 0 <= mc <= 100
        if not all(ests):
            flipped = list(ests)
            flipped[flipped.index(False)] = True
            assert motion_completion(outcomes(flipped)) >= mc


class TestProportionalSpeed:
    def test_equal_reference(self):
        w = np.array([[1.0, -1.0], [0.5, -1.5]])
        assert proportional_speed(w, 1.0) == 1.0

    def test_zero_window(self):
        assert proportional_speed(np.zeros((8, 200)), 0.3) == 0.0

    def test_clamped(self):
        assert proportional_speed(np.full((2, 4), 2.0), 1.0) == 1.0

    def test_half(self):
        assert proportional_speed(np.full((2, 4), -0.25), 0.5) == 0.5

    @pytest.mark.parametrize("ref", [0.0, -1.0])
    def test_bad_reference(self, ref):
        with pytest.raises(CalibrationError):
            proportional_speed(np.ones((1, 3)), ref)

    def test_calibration_percentile(self):
        assert calibrate_reference(np.arange(101.0)) == pytest.approx(95.0)
        with pytest.raises(CalibrationError):
            calibrate_reference([])


class TestEfficacy:
    ests = [1, 1, 0, 1]
    props = [0.5, 1.0, 0.8, 0.25]

    def test_literal(self):
        assert motion_efficacy(outcomes(self.ests, self.props), "literal") == 75.0

    def test_speed_weighted(self):
        assert motion_efficacy(outcomes(self.ests, self.props), "speed_weighted") == 43.75
        assert motion_efficacy(outcomes(self.ests, self.props), "speed-weighted") == 43.75

    def test_perfect(self):
        o = outcomes([1] * 5)
        assert motion_efficacy(o, "literal") == motion_efficacy(o, "speed_weighted") == 100.0

    def test_zero_speed_windows_skipped_in_literal(self):
        o = outcomes([1, 0, 0], [1.0, 0.0, 0.5])
        assert motion_efficacy(o, "literal") == 50.0

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            motion_efficacy(outcomes([1]), "bogus")

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.booleans(), st.floats(0, 1)), min_size=1, max_size=50))
    def test_ordering(self, pairs):
        o = outcomes([e for e, _ in pairs], [p for _, p in pairs])
        lit = motion_efficacy(o, "literal")
        sw = motion_efficacy(o, "speed_weighted")
        moving = [x for x in o if x.prop > 0]
        if moving:
            assert lit <= motion_completion(moving) + 1e-12
        assert sw <= lit + 1e-9 or not moving

    def test_report(self):
        r = TrialReport.from_outcomes(outcomes(self.ests, self.props), "speed-weighted")
        assert (r.mc_percent, r.efficacy_percent, r.mode) == (75.0, 43.75, "speed_weighted")


class TestConfusion:
    def test_perfect_is_diagonal(self):
        t = [A, B, C, A, C]
        cm = confusion(targets=t, predictions=t)
        assert np.array_equal(cm.counts, np.diag([2, 1, 2]))

    def test_single_pair(self):
        cm = confusion(targets=[A], predictions=[B])
        assert cm.counts.tolist() == [[0, 1], [0, 0]]

    def test_trace_equals_mc(self, rng):
        labels = [A, B, C]
        t = [labels[i] for i in rng.integers(0, 3, 200)]
        p = [labels[i] for i in rng.integers(0, 3, 200)]
        o = [WindowOutcome(pp, tt, 0.5) for pp, tt in zip(p, t)]
        cm = confusion(o)
        assert np.trace(cm.counts) / cm.total == motion_completion(o) / 100
        assert cm.counts.sum(axis=1).tolist() == [t.count(x) for x in labels]

    def test_macro_equals_mc_when_balanced(self, rng):
        labels = [A, B, C]
        t = [lab for lab in labels for _ in range(40)]
        p = [labels[i] if rng.random() < 0.2 else tt for tt, i in zip(t, rng.integers(0, 3, 120))]
        o = [WindowOutcome(pp, tt) for pp, tt in zip(p, t)]
        cm = confusion(o)
        assert np.mean(cm.per_class_accuracy()) == pytest.approx(motion_completion(o) / 100, abs=1e-12)

    def test_unknown_label(self):
        with pytest.raises(DataError):
            confusion(targets=[A], predictions=[C], labels=[A, B])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            confusion(targets=[A, B], predictions=[A])

    def test_csv(self):
        cm = confusion(targets=[A, B], predictions=[A, A])
        assert cm.to_csv() == "true\\pred,a,b\na,1,0\nb,1,0\n"
