import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeforge.evaluation import (
    Fixation,
    Saccade,
    compute_speeds,
    detect_ivt,
    evaluate_dataset,
    ks_two_sample,
    matched_fidelity,
    qq_pairs,
    simulate_gain_oracle,
    write_eval_report,
)
from gazeforge.extraction import CalibrationModel, apply_calibration
from gazeforge.model import ClassLabel, PipelineConfig, Space

from oracles import brute_ks_d, brute_quantile
from synth import make_trajectory, random_walk_trajectory

CFG = PipelineConfig()

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


class TestComputeSpeeds:
    def test_constant_is_all_zeros(self):
        t = make_trajectory([(5.0, 5.0)] * 10)
        assert compute_speeds(t).tolist() == [0.0] * 9

    def test_345_triangle(self):
        t = make_trajectory([(0.0, 0.0), (3.0, 4.0)])
        assert compute_speeds(t).tolist() == [5.0]

    def test_hand_euclidean(self):
        t = make_trajectory([(0.0, 0.0), (1.0, 0.0), (1.0, 2.0)])
        assert compute_speeds(t).tolist() == [1.0, 2.0]

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            compute_speeds(make_trajectory([(0.0, 0.0)]))


def plateau_jump_trajectory(n_jumps, plateau_len=5, jump=100.0):
    """K constant plateaus separated by single-transition jumps >= jump px."""
    xy = []
    x = 0.0
    for _ in range(n_jumps + 1):
        xy.extend([(x, 0.0)] * plateau_len)
        x += jump
    return make_trajectory(xy[: plateau_len * (n_jumps + 1)])


class TestDetectIvt:
    def test_constant_is_one_long_fixation(self):
        t = make_trajectory([(10.0, 10.0)] * 100)
        events = detect_ivt(t, 5.0, 15.0)
        assert events.fixations == (Fixation(start=0, length=99),)
        assert events.saccades == ()

    def test_single_jump_two_fixations(self):
        # 5 frames at rest, jump of 100 px, 6 more frames at rest
        xy = [(0.0, 0.0)] * 5 + [(100.0, 0.0)] * 6
        events = detect_ivt(make_trajectory(xy), 5.0, 15.0)
        assert events.fixations == (Fixation(0, 4), Fixation(5, 5))
        assert events.saccades == (Saccade(4, 1, 100.0),)

    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_k_jumps_give_k_saccades_k_plus_1_fixations(self, k):
        events = detect_ivt(plateau_jump_trajectory(k), 5.0, 15.0)
        assert len(events.saccades) == k
        assert len(events.fixations) == k + 1
        assert all(s.amplitude_px == 100.0 for s in events.saccades)

    def test_between_band_belongs_to_neither(self):
        # speeds: 0 (fixation), 10 (band), 20 (saccade), 10, 0
        xy = [(0.0, 0.0), (0.0, 0.0), (10.0, 0.0), (30.0, 0.0), (40.0, 0.0), (40.0, 0.0)]
        events = detect_ivt(make_trajectory(xy), 5.0, 15.0)
        assert events.fixations == (Fixation(0, 1), Fixation(4, 1))
        assert events.saccades == (Saccade(2, 1, 20.0),)

    def test_partition_property(self):
        t = random_walk_trajectory(400, fps=25.0, seed=5, step_std=8.0)
        speeds = compute_speeds(t)
        events = detect_ivt(t, 5.0, 15.0)
        covered_fix = np.zeros(len(speeds), dtype=int)
        for f in events.fixations:
            covered_fix[f.start : f.start + f.length] += 1
        covered_sac = np.zeros(len(speeds), dtype=int)
        for s in events.saccades:
            covered_sac[s.start : s.start + s.length] += 1
        assert np.array_equal(covered_fix, (speeds < 5.0).astype(int))
        assert np.array_equal(covered_sac, (speeds > 15.0).astype(int))
        assert not np.any((covered_fix > 0) & (covered_sac > 0))

    def test_path_length_decomposition_is_exact(self):
        t = random_walk_trajectory(600, fps=25.0, seed=6, step_std=8.0)
        speeds = compute_speeds(t)
        events = detect_ivt(t, 5.0, 15.0)
        parts = []
        for f in events.fixations:
            parts.extend(speeds[f.start : f.start + f.length])
        for s in events.saccades:
            parts.extend(speeds[s.start : s.start + s.length])
        band = (speeds >= 5.0) & (speeds <= 15.0)
        parts.extend(speeds[band])
        assert math.fsum(parts) == math.fsum(speeds)

    def test_threshold_validation(self):
        t = make_trajectory([(0.0, 0.0)] * 3)
        with pytest.raises(ValueError, match="below"):
            detect_ivt(t, 15.0, 5.0)
        with pytest.raises(ValueError, match="positive"):
            detect_ivt(t, -1.0, 5.0)


class TestKsTwoSample:
    def test_identical_samples_give_zero(self):
        r = ks_two_sample([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
        assert r.d_statistic == 0.0
        assert r.p_value == 1.0

    def test_disjoint_supports_give_one(self):
        r = ks_two_sample([0.0, 1.0], [10.0, 11.0])
        assert r.d_statistic == 1.0

    def test_hand_worked_quarter(self):
        r = ks_two_sample([1, 2, 3, 4], [2, 3, 4, 5])
        assert r.d_statistic == pytest.approx(brute_ks_d([1, 2, 3, 4], [2, 3, 4, 5]))
        assert r.d_statistic == pytest.approx(0.25)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            ks_two_sample([], [1.0])

    @given(
        st.lists(finite_floats, min_size=1, max_size=60),
        st.lists(finite_floats, min_size=1, max_size=60),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_and_is_symmetric(self, a, b):
        r = ks_two_sample(a, b)
        assert r.d_statistic == pytest.approx(brute_ks_d(a, b), abs=1e-12)
        assert r.d_statistic == ks_two_sample(b, a).d_statistic
        assert 0.0 <= r.d_statistic <= 1.0
        assert 0.0 <= r.p_value <= 1.0

    @given(
        st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False),
                 min_size=2, max_size=40),
        st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False),
                 min_size=2, max_size=40),
    )
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_strictly_increasing_transform(self, a, b):
        before = ks_two_sample(a, b).d_statistic
        f = lambda xs: [math.atan(x) + 0.1 * x for x in xs]  # strictly increasing
        after = ks_two_sample(f(a), f(b)).d_statistic
        assert after == pytest.approx(before, abs=1e-12)


class TestQqPairs:
    def test_identical_samples_on_diagonal(self):
        a = [3.0, 1.0, 4.0, 1.5, 9.0]
        pairs = qq_pairs(a, a, 7)
        assert np.allclose(pairs[:, 0], pairs[:, 1])

    def test_constant_shift_offsets_second_coordinate(self):
        a = np.linspace(0, 10, 50)
        pairs = qq_pairs(a, a + 2.5, 9)
        assert np.allclose(pairs[:, 1] - pairs[:, 0], 2.5)

    def test_levels_against_order_statistic_oracle(self):
        a = np.arange(100.0)
        pairs = qq_pairs(a, a, 3)
        expected = [brute_quantile(a, p) for p in (0.25, 0.5, 0.75)]
        assert pairs[:, 0].tolist() == pytest.approx(expected)
        assert expected[0] == pytest.approx(24.75)

    @given(
        st.lists(finite_floats, min_size=1, max_size=50),
        st.lists(finite_floats, min_size=1, max_size=50),
        st.integers(min_value=1, max_value=30),
    )
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_k_on_both_axes(self, a, b, k):
        pairs = qq_pairs(a, b, k)
        assert np.all(np.diff(pairs[:, 0]) >= 0)
        assert np.all(np.diff(pairs[:, 1]) >= 0)

    def test_validation(self):
        with pytest.raises(ValueError, match="non-empty"):
            qq_pairs([], [1.0], 3)
        with pytest.raises(ValueError, match="k_points"):
            qq_pairs([1.0], [1.0], 0)


def norm_traj(samples, source_id="iris"):
    return make_trajectory(samples, fps=25.0, space=Space.NORMALIZED, source_id=source_id)


def varied_iris(n=400, seed=0, spread=(0.18, 0.12)):
    rng = np.random.default_rng(seed)
    walk = np.cumsum(rng.normal(0, 0.01, size=(n, 2)), axis=0)
    walk -= walk.mean(axis=0)
    walk = np.clip(walk, (-spread[0], -spread[1]), spread)
    return norm_traj(0.5 + walk)


class TestMatchedFidelity:
    def test_identity(self):
        real = varied_iris()
        report = matched_fidelity(real, real)
        assert report.mean_error == 0.0
        assert report.median_error == 0.0
        assert report.p95_error == 0.0
        assert report.r_x == pytest.approx(1.0, abs=1e-12)
        assert report.r_y == pytest.approx(1.0, abs=1e-12)
        assert report.amplitude_ratio_x == pytest.approx(1.0)
        assert report.std_ratio_y == pytest.approx(1.0)
        assert report.sample_count == 400

    def test_constant_offset(self):
        real = varied_iris(seed=1)
        sim = norm_traj(real.samples + (0.03, 0.04))
        report = matched_fidelity(real, sim)
        assert report.mean_error == pytest.approx(0.05)
        assert report.r_x == pytest.approx(1.0, abs=1e-12)
        assert report.amplitude_ratio_x == pytest.approx(1.0, abs=1e-12)
        assert report.std_ratio_x == pytest.approx(1.0, abs=1e-12)

    def test_pure_axis_gains_recovered(self):
        real = varied_iris(seed=2)
        sim = norm_traj(0.5 + (real.samples - 0.5) * (0.30, 0.42))
        report = matched_fidelity(real, sim)
        assert report.amplitude_ratio_x == pytest.approx(0.30, abs=1e-9)
        assert report.amplitude_ratio_y == pytest.approx(0.42, abs=1e-9)
        assert report.r_x == pytest.approx(1.0, abs=1e-12)
        assert report.r_y == pytest.approx(1.0, abs=1e-12)

    def test_gain_oracle_closed_loop(self):
        # full-canvas calibration makes the oracle an exact inverse, so the
        # matched report must recover the configured gains as amplitude ratios
        real = varied_iris(seed=3)
        full_canvas = CalibrationModel(s_x=1280.0, s_y=720.0, mu_x=640.0, mu_y=360.0)
        cursor = apply_calibration(real, full_canvas, CFG)
        sim = simulate_gain_oracle(cursor, (0.30, 0.42), 0.0, seed=0, config=CFG)
        report = matched_fidelity(real, sim)
        assert report.amplitude_ratio_x == pytest.approx(0.30, abs=1e-6)
        assert report.amplitude_ratio_y == pytest.approx(0.42, abs=1e-6)
        assert report.r_x == pytest.approx(1.0, abs=1e-12)
        assert report.r_y == pytest.approx(1.0, abs=1e-12)

    def test_length_mismatch_reports_counts(self):
        real = varied_iris(n=100)
        sim = varied_iris(n=99)
        with pytest.raises(ValueError, match="100.*99"):
            matched_fidelity(real, sim)

    def test_zero_real_amplitude_is_error_not_infinity(self):
        real = norm_traj([(0.5, 0.5)] * 10)
        sim = varied_iris(n=10)
        with pytest.raises(ValueError, match="zero real amplitude"):
            matched_fidelity(real, sim)

    def test_space_checked(self):
        t = make_trajectory([(640.0, 360.0)] * 4, space=Space.CANVAS)
        with pytest.raises(Exception, match="normalized"):
            matched_fidelity(t, t)

    def test_json_dict_mirrors_report_rows(self):
        report = matched_fidelity(varied_iris(seed=4), varied_iris(seed=4))
        d = report.to_json_dict()
        assert d["mean_iris_error_norm"] == 0.0
        assert set(d) >= {
            "mean_iris_error_norm", "median_iris_error", "p95_iris_error",
            "correlation_x", "correlation_y", "amplitude_ratio_x",
            "amplitude_ratio_y", "std_ratio_x", "std_ratio_y", "sample_count",
        }


class TestGainOracle:
    def test_zero_gain_pins_output_to_center(self):
        cursor = random_walk_trajectory(50, fps=25.0, seed=7)
        out = simulate_gain_oracle(cursor, (0.0, 0.0), 0.0, seed=1, config=CFG)
        assert np.all(out.samples == 0.5)
        assert out.space is Space.NORMALIZED

    def test_unit_gain_maps_corner_to_corner(self):
        cursor = make_trajectory([(1280.0, 720.0)], space=Space.CANVAS)
        out = simulate_gain_oracle(cursor, (1.0, 1.0), 0.0, seed=1, config=CFG)
        assert tuple(out.samples[0]) == (1.0, 1.0)

    def test_deterministic_given_seed(self):
        cursor = random_walk_trajectory(50, fps=25.0, seed=8)
        a = simulate_gain_oracle(cursor, (0.5, 0.5), 0.02, seed=9, config=CFG)
        b = simulate_gain_oracle(cursor, (0.5, 0.5), 0.02, seed=9, config=CFG)
        c = simulate_gain_oracle(cursor, (0.5, 0.5), 0.02, seed=10, config=CFG)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_negative_gain_rejected(self):
        cursor = random_walk_trajectory(5, fps=25.0, seed=8)
        with pytest.raises(ValueError, match="non-negative"):
            simulate_gain_oracle(cursor, (-0.1, 0.5), 0.0, seed=1)


def canvas_walk(seed, n=800, step=6.0):
    return random_walk_trajectory(n, fps=25.0, seed=seed, step_std=step,
                                  source_id=f"w{seed}")


class TestEvaluateDataset:
    def test_self_comparison_gives_zero_d(self):
        trajs = {ClassLabel.READING: [canvas_walk(1)],
                 ClassLabel.CONVERSATION: [canvas_walk(2)]}
        report = evaluate_dataset(trajs, trajs, CFG)
        for metrics in report["classes"].values():
            for block in metrics.values():
                assert not block.get("undefined")
                assert block["d"] == 0.0

    def test_disjoint_constant_speed_pools_give_d_one(self):
        slow = make_trajectory(
            np.column_stack([np.arange(100) * 1.0, np.zeros(100)]) + (100, 100),
        )
        fast = make_trajectory(
            np.column_stack([np.arange(100) * 4.0, np.zeros(100)]) + (100, 100),
        )
        report = evaluate_dataset(
            {ClassLabel.READING: [slow], ClassLabel.CONVERSATION: [slow]},
            {ClassLabel.READING: [fast], ClassLabel.CONVERSATION: [fast]},
            CFG,
        )
        assert report["classes"]["reading"]["speed"]["d"] == 1.0

    def test_empty_metric_pool_marked_undefined(self):
        const = make_trajectory([(100.0, 100.0)] * 50)  # zero speeds: no saccades
        report = evaluate_dataset(
            {ClassLabel.READING: [const], ClassLabel.CONVERSATION: [const]},
            {ClassLabel.READING: [const], ClassLabel.CONVERSATION: [const]},
            CFG,
        )
        sac = report["classes"]["reading"]["saccade_amplitude"]
        assert sac["undefined"] is True
        assert sac["d"] is None
        # speed pools exist (all zeros), so that metric stays defined
        assert report["classes"]["reading"]["speed"]["d"] == 0.0

    def test_missing_side_rejected(self):
        trajs = {ClassLabel.READING: [canvas_walk(3)]}
        with pytest.raises(ValueError, match="no generated"):
            evaluate_dataset(trajs, {}, CFG)

    def test_report_shape_and_qq_serialization(self, tmp_path):
        src = {ClassLabel.READING: [canvas_walk(4)],
               ClassLabel.CONVERSATION: [canvas_walk(5)]}
        gen = {ClassLabel.READING: [canvas_walk(6)],
               ClassLabel.CONVERSATION: [canvas_walk(7)]}
        report = evaluate_dataset(src, gen, CFG, qq_points=17)
        block = report["classes"]["reading"]["speed"]
        assert set(block) == {"d", "n", "m", "p_value", "qq"}
        assert len(block["qq"]) == 17
        assert 0.0 <= block["d"] <= 1.0

        out = tmp_path / "report.json"
        written = write_eval_report(report, out)
        parsed = json.loads(out.read_text())
        assert parsed["schema_version"] == 1
        panels = [p for p in written if p.endswith(".csv")]
        assert len(panels) == 6  # 2 classes x 3 metrics
        first_panel = panels[0]
        lines = open(first_panel).read().splitlines()
        assert lines[0] == "q_source,q_generated"
        assert len(lines) == 18
