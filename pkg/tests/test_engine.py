import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_flags
from qtaco.engine import (
    ALL,
    BarrenPlateauEstimator,
    BarrenPlateauReport,
    EstimatorSettings,
    FeedbackMessage,
    extract_structure,
    format_value,
    gate_type_variance,
    generate_feedback,
    update_estimator,
)
from qtaco.vqc import ParameterDescriptor, build_vqc, named_parameters


def descriptors(kinds):
    return tuple(ParameterDescriptor(i, 0, i, k) for i, k in enumerate(kinds))


def run_stream(stream, settings, kinds=None):
    stream = np.asarray(stream, dtype=float)
    descs = descriptors(kinds or ["RY"] * stream.shape[1])
    est = BarrenPlateauEstimator(stream.shape[1], settings)
    return [est.update(t + 1, g, descs) for t, g in enumerate(stream)]


class TestFormat:
    @pytest.mark.parametrize(
        "value, text",
        [
            (3.2e-9, "3.2e-9"),
            (0.123456789, "1.23457e-1"),
            (1.0, "1e0"),
            (0.0, "0e0"),
            (-2.5e12, "-2.5e12"),
            (0.01, "1e-2"),
            (999999.5, "1e6"),
            (float("nan"), "nan"),
        ],
    )
    def test_values(self, value, text):
        assert format_value(value) == text

    def test_six_significant_digits(self):
        for x in np.random.default_rng(0).lognormal(0, 10, 200):
            assert float(format_value(x)) == pytest.approx(x, rel=5e-6)


class TestExtractStructure:
    def test_counts(self):
        vqc = build_vqc(2, 2, 0)
        rep = extract_structure(vqc)
        assert rep.n_params == 4
        assert sum(rep.gate_counts.values()) == 4
        assert rep.n_entanglers == 4
        assert rep.descriptors == named_parameters(vqc)

    @pytest.mark.parametrize("n, layers", [(1, 3), (3, 2), (5, 4)])
    def test_entangler_count(self, n, layers):
        rep = extract_structure(build_vqc(n, layers, 1))
        assert rep.n_entanglers == (n * layers if n >= 2 else 0)
        assert rep.n_params == n * layers

    def test_deterministic(self):
        assert extract_structure(build_vqc(3, 3, 2)) == extract_structure(build_vqc(3, 3, 2))


class TestGateTypeVariance:
    def test_equal_gradients(self):
        assert gate_type_variance([0.4, 0.4, 0.4], descriptors(["RY"] * 3)) == {"RY": 0.0}

    def test_plus_minus_one(self):
        assert gate_type_variance([1.0, -1.0], descriptors(["RY", "RY"]))["RY"] == 1.0

    def test_missing_kind_absent(self):
        out = gate_type_variance([0.1, 0.2, 0.3], descriptors(["RY", "RZ", "RY"]))
        assert set(out) == {"RY", "RZ"}
        assert out["RZ"] == 0.0

    def test_identical_per_kind_is_zero(self):
        kinds = ["RX", "RY", "RZ", "RX", "RY", "RZ"]
        out = gate_type_variance([0.1, 0.2, 0.3, 0.1, 0.2, 0.3], descriptors(kinds))
        assert out == {"RX": 0.0, "RY": 0.0, "RZ": 0.0}

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            gate_type_variance([0.1], descriptors(["RY", "RY"]))


class TestEstimator:
    def test_constant_stream_flagged_after_warmup(self):
        s = EstimatorSettings(window=5)
        reports = run_stream(np.full((8, 2), 0.3), s)
        for r in reports[:4]:
            assert r.warming_up and not r.flags.any()
        for r in reports[4:]:
            assert r.per_param_variance.max() == 0.0
            assert r.flags.all() and r.all_flagged

    def test_alternating_stream_not_flagged(self):
        stream = np.array([[0.1 if t % 2 else -0.1] for t in range(40)])
        reports = run_stream(stream, EstimatorSettings())
        for r in reports[9:]:
            assert r.per_param_variance[0] == pytest.approx(0.01, rel=1e-12)
        assert not any(r.flags.any() for r in reports)

    def test_drop_flagged_within_window(self):
        w = 10
        rng = np.random.default_rng(1)
        stream = np.concatenate([0.1 * rng.normal(size=(3 * w, 3)), 1e-5 * rng.normal(size=(3 * w, 3))])
        reports = run_stream(stream, EstimatorSettings(window=w))
        first = [next(r.epoch for r in reports if r.flags[k]) for k in range(3)]
        assert all(3 * w < e <= 4 * w for e in first)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        scale = np.where(np.arange(120) < 50, 1.0, 1e-3)[:, None]
        stream = rng.normal(size=(120, 4)) * scale
        s = EstimatorSettings(window=7)
        reports = run_stream(stream, s)
        expected, variances = brute_force_flags(stream, 7, s.tau_abs, s.tau_rel, s.drop_ratio)
        for t, r in enumerate(reports):
            assert r.flags.tolist() == expected[t]
            if t in variances:
                np.testing.assert_allclose(r.per_param_variance, variances[t], rtol=1e-12)

    def test_baseline_set_once(self):
        est = BarrenPlateauEstimator(1, EstimatorSettings(window=3))
        d = descriptors(["RX"])
        for t, g in enumerate([1.0, 2.0, 3.0], start=1):
            est.update(t, [g], d)
        first = est.baseline.copy()
        for t, g in enumerate([7.0, -4.0, 0.5], start=4):
            est.update(t, [g], d)
        np.testing.assert_array_equal(est.baseline, first)

    def test_out_of_order_and_length_errors(self):
        est = BarrenPlateauEstimator(2, EstimatorSettings(window=2))
        d = descriptors(["RX", "RY"])
        update_estimator(est, 3, [0.1, 0.2], d)
        with pytest.raises(ValueError):
            est.update(3, [0.1, 0.2], d)
        with pytest.raises(ValueError):
            est.update(4, [0.1], d)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            EstimatorSettings(window=0)
        with pytest.raises(ValueError):
            EstimatorSettings(tau_rel=-1)

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        window=st.integers(1, 8),
        drop_at=st.integers(0, 60),
        drop=st.sampled_from([1.0, 1e-2, 1e-4, 1e-6]),
    )
    def test_brute_force_property(self, seed, window, drop_at, drop):
        rng = np.random.default_rng(seed)
        scale = np.where(np.arange(60) < drop_at, 1.0, drop)[:, None]
        stream = rng.normal(size=(60, 3)) * scale
        s = EstimatorSettings(window=window)
        reports = run_stream(stream, s)
        expected, _ = brute_force_flags(stream, window, s.tau_abs, s.tau_rel, s.drop_ratio)
        assert [r.flags.tolist() for r in reports] == expected
        assert not any(r.flags.any() for r in reports[: window - 1])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), c=st.sampled_from([1e-3, 0.5, 2.0, 7.0, 1e3]))
    def test_scaling_invariance_of_relative_criteria(self, seed, c):
        rng = np.random.default_rng(seed)
        scale = np.where(np.arange(50) < 25, 1.0, 1e-3)[:, None]
        stream = rng.normal(size=(50, 3)) * scale
        # tau_abs tiny enough that only the relative clauses can fire
        s = EstimatorSettings(window=5, tau_abs=1e-300)
        base = run_stream(stream, s)
        scaled = run_stream(stream * c, s)
        for a, b in zip(base, scaled):
            assert a.flags.tolist() == b.flags.tolist()
            if not a.warming_up:
                np.testing.assert_allclose(b.per_param_variance, c * c * a.per_param_variance, rtol=1e-12)


class TestFeedback:
    def report(self, epoch, variance, flags):
        return BarrenPlateauReport(epoch, np.array(variance), np.array(flags), {})

    def test_no_flags(self):
        assert generate_feedback(self.report(12, [1.0, 2.0], [False, False]), descriptors(["RX", "RY"])) == []

    def test_warmup_report(self):
        r = BarrenPlateauReport(1, None, np.zeros(2, dtype=bool), {})
        assert generate_feedback(r, descriptors(["RX", "RY"])) == []

    def test_rendering(self):
        kinds = ["RX"] * 17 + ["RY"]
        variance = [1.0] * 17 + [3.2e-9]
        flags = [False] * 17 + [True]
        (msg,) = generate_feedback(self.report(42, variance, flags), descriptors(kinds))
        assert msg == FeedbackMessage(42, 17, "RY", 3.2e-9)
        assert msg.text == "[BP] epoch=42 param=17 type=RY value=3.2e-9"

    def test_all_flagged(self):
        variance = [1e-10, 2e-10, 5e-11]
        msgs = generate_feedback(self.report(30, variance, [True] * 3), descriptors(["RX", "RY", "RZ"]))
        assert len(msgs) == 4
        assert [m.parameter_index for m in msgs[:3]] == [0, 1, 2]
        assert [m.bp_value for m in msgs[:3]] == variance
        last = msgs[-1]
        assert (last.parameter_index, last.parameter_type) == (ALL, ALL)
        assert last.text == "[BP] epoch=30 param=ALL type=ALL value=2e-10 hint=reduce_layers"

    def test_values_match_report(self):
        reports = run_stream(np.full((6, 3), 0.5), EstimatorSettings(window=3), ["RX", "RZ", "RZ"])
        for r in reports:
            for m in generate_feedback(r, descriptors(["RX", "RZ", "RZ"])):
                if m.parameter_index != ALL:
                    assert m.bp_value == r.per_param_variance[m.parameter_index]
