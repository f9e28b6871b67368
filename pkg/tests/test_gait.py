"""Walking-segment detection, stream alignment, event detection and
parameter estimation."""

import numpy as np
import pytest

from radargait import (AlignmentError, ConfidenceSeries, GaitModel,
                       Trajectory, WalkSegConfig, align_streams,
                       detect_events, estimate_parameters, simulate_walk,
                       walking_confidence, walking_mask)
from radargait.gait import GaitEvents


def _speed_trajectory(v: np.ndarray, fs: float = 100.0) -> Trajectory:
    n = v.size
    return Trajectory(time=np.arange(n) / fs, range=np.full(n, 3.0),
                      velocity=np.asarray(v, dtype=float))


class TestWalkingConfidence:
    def test_sinusoid_bout_high_quiet_flanks_low(self):
        # confidence is min-max normalised per recording, so the natural
        # fixture is a periodic bout between quiet flanks
        fs = 100.0
        t = np.arange(int(20 * fs)) / fs
        v = np.where((t >= 5.0) & (t < 15.0),
                     np.sin(2 * np.pi * t / 1.1), 0.0)
        conf = walking_confidence(_speed_trajectory(v))
        bout = (conf.times > 6.5) & (conf.times < 13.5)
        quiet = conf.times < 4.0
        assert np.mean(conf.values[bout] >= 0.75) >= 0.9
        assert np.all(conf.values[quiet] == 0.0)

    def test_zero_variance_zero_confidence(self):
        conf = walking_confidence(_speed_trajectory(np.zeros(600)))
        assert np.all(conf.values == 0)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(1)
        conf = walking_confidence(_speed_trajectory(rng.standard_normal(800)))
        assert np.all(conf.values >= 0) and np.all(conf.values <= 1)

    def test_white_noise_rarely_crosses_threshold(self):
        # Monte-Carlo false-walking rate over exactly 1000 windows
        cfg = WalkSegConfig()
        fs = 100.0
        win = int(round(cfg.window_duration * fs))
        hop = max(1, int(round(win * (1.0 - cfg.overlap_fraction))))
        n = 999 * hop + win
        rng = np.random.default_rng(20260823)
        conf = walking_confidence(
            _speed_trajectory(rng.standard_normal(n)), cfg)
        assert conf.values.size == 1000
        rate = float(np.mean(conf.values >= cfg.confidence_threshold))
        assert rate < 0.05

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        v = np.sin(2 * np.pi * np.arange(900) / 110.0) \
            + 0.1 * rng.standard_normal(900)
        a = walking_confidence(_speed_trajectory(v))
        b = walking_confidence(_speed_trajectory(37.5 * v))
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_too_short_recording(self):
        with pytest.raises(ValueError, match="too short"):
            walking_confidence(_speed_trajectory(np.ones(10)))


class TestWalkingMask:
    def test_all_ones_all_true(self):
        times = np.arange(100) * 0.05
        mask = walking_mask(ConfidenceSeries(times=times, values=np.ones(100)))
        assert mask.values.all()

    def test_threshold_and_short_island_rules(self):
        dt = 0.05
        n = 400
        conf = np.full(n, 0.4)       # below hysteresis reach of any run
        conf[50:150] = 0.9           # 5 s bout: survives
        conf[300:308] = 0.9          # 0.4 s island: dropped
        times = np.arange(n) * dt
        mask = walking_mask(ConfidenceSeries(times=times, values=conf))
        assert mask.values[60:140].all()
        assert not mask.values[305]
        assert not mask.values[:30].any()

    def test_segments_listing(self):
        times = np.arange(200) * 0.05
        conf = np.zeros(200)
        conf[20:80] = 1.0
        conf[120:180] = 1.0
        mask = walking_mask(ConfidenceSeries(times=times, values=conf))
        assert len(mask.segments) == 2

    def test_two_traversals_match_truth(self):
        # kinematic truth straight into the detector: two walkway
        # traversals separated by a turn
        truth = simulate_walk(GaitModel(trial_duration=30.0), seed=14)
        step = 20  # 2000 Hz truth -> 100 Hz detector input
        feet = Trajectory(time=truth.time[::step],
                          range=truth.merged_feet.range[::step],
                          velocity=truth.merged_feet.velocity[::step])
        mask = walking_mask(walking_confidence(feet))
        rate = truth.sample_rate
        edges = np.flatnonzero(np.diff(np.concatenate(
            ([0], truth.true_walking_mask.view(np.int8), [0]))))
        true_runs = [(a / rate, (b - 1) / rate) for a, b in edges.reshape(-1, 2)]
        assert len(true_runs) == 2
        assert len(mask.segments) == 2
        for (ea, eb), (ta, tb) in zip(mask.segments, true_runs):
            assert abs(ea - ta) <= 0.5
            assert abs(eb - tb) <= 0.5


class TestTorsoEdgeRefinement:
    def _mask(self, times, runs):
        v = np.zeros(times.size, dtype=bool)
        for a, b in runs:
            v[(times >= a) & (times <= b)] = True
        from radargait.gait import WalkingMask
        return WalkingMask(times=times, values=v)

    def _torso(self, t, speed):
        return Trajectory(time=t, range=3.0 + np.cumsum(speed) * (t[1] - t[0]),
                          velocity=speed)

    def test_boundaries_snap_to_speed_edges(self):
        from radargait.pipeline import _refine_edges_with_torso
        fs = 100.0
        t = np.arange(int(20 * fs)) / fs
        speed = np.where((t >= 4.0) & (t < 12.0), 0.85, 0.0)
        mask = self._mask(t, [(5.0, 11.2)])  # blurred by nearly a stride
        out = _refine_edges_with_torso(mask, self._torso(t, speed),
                                       WalkSegConfig())
        (a, b), = out.segments
        assert a == pytest.approx(4.0, abs=0.2)
        assert b == pytest.approx(12.0, abs=0.2)

    def test_long_interior_stop_splits_bout(self):
        from radargait.pipeline import _refine_edges_with_torso
        fs = 100.0
        t = np.arange(int(24 * fs)) / fs
        walking = ((t >= 2.0) & (t < 9.0)) | ((t >= 12.0) & (t < 20.0))
        speed = np.where(walking, 0.85, 0.0)
        mask = self._mask(t, [(2.0, 20.0)])  # detector merged across a turn
        out = _refine_edges_with_torso(mask, self._torso(t, speed),
                                       WalkSegConfig())
        assert len(out.segments) == 2

    def test_glitch_does_not_drag_boundary(self):
        from radargait.pipeline import _refine_edges_with_torso
        fs = 100.0
        t = np.arange(int(16 * fs)) / fs
        speed = np.where((t >= 3.0) & (t < 10.0), 0.85, 0.0)
        speed[t >= 10.5] = 2.5  # tracker chasing noise after the bout
        mask = self._mask(t, [(3.0, 10.0)])
        out = _refine_edges_with_torso(mask, self._torso(t, speed),
                                       WalkSegConfig())
        (_, b), = out.segments
        assert b <= 10.3

    def test_no_translation_keeps_detector_boundaries(self):
        from radargait.pipeline import _refine_edges_with_torso
        fs = 100.0
        t = np.arange(int(10 * fs)) / fs
        mask = self._mask(t, [(2.0, 7.0)])
        out = _refine_edges_with_torso(mask, self._torso(t, np.zeros(t.size)),
                                       WalkSegConfig())
        assert out.segments == mask.segments


class TestAlignStreams:
    def test_identical_zero_lag(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(500)
        assert align_streams(x, x, 100.0) == pytest.approx(0.0, abs=1e-9)

    def test_known_delay_recovered(self):
        fs = 100.0
        t = np.arange(2000) / fs
        ref = np.sin(2 * np.pi * 0.9 * t) * np.exp(-((t - 10) / 4) ** 2)
        delay = 0.35
        radar = np.interp(t - delay, t, ref)
        lag = align_streams(radar, ref, fs)
        assert lag == pytest.approx(delay, abs=0.5 / fs)

    def test_injected_trigger_latency(self):
        truth = simulate_walk(GaitModel(trial_duration=20.0), seed=9)
        fs = 100.0
        t = np.arange(int(20 * fs)) / fs
        ref = np.interp(t, truth.time, truth.merged_feet.speed)
        radar = np.interp(t - 0.2, t, ref)  # events appear 0.2 s late
        lag = align_streams(radar, ref, fs, max_lag=0.25)
        # positive lag: the radar stream runs late relative to the reference
        assert lag == pytest.approx(0.2, abs=0.02)

    def test_weak_correlation_rejected(self):
        rng = np.random.default_rng(4)
        with pytest.raises(AlignmentError):
            align_streams(rng.standard_normal(2000),
                          rng.standard_normal(2000), 100.0)

    def test_zero_variance_rejected(self):
        with pytest.raises(AlignmentError):
            align_streams(np.zeros(100), np.ones(100), 100.0)


class TestDetectEvents:
    def test_rectified_sinusoid_extrema(self):
        fs = 200.0
        t = np.arange(int(4.4 * fs)) / fs
        v = np.sin(2 * np.pi * t / 1.1)
        feet = Trajectory(time=t, range=2.0 + 0.5 * t, velocity=v)
        ev = detect_events(feet, np.ones(t.size, dtype=bool))
        assert ev.hs_times.size >= 3
        for ht in ev.hs_times:
            k = round(ht / 0.55)
            assert ht == pytest.approx(0.55 * k, abs=0.01)
        for tt in ev.to_times:
            k = round((tt - 0.275) / 0.55)
            assert tt == pytest.approx(0.275 + 0.55 * k, abs=0.01)

    def test_noise_free_walk_hs_accuracy(self):
        truth = simulate_walk(GaitModel(trial_duration=20.0,
                                        timing_jitter=0.0), seed=6)
        step = 20
        feet = Trajectory(time=truth.time[::step],
                          range=truth.merged_feet.range[::step],
                          velocity=truth.merged_feet.velocity[::step])
        mask = truth.true_walking_mask[::step]
        ev = detect_events(feet, mask)
        # every detected HS sits within 10 ms of a true HS
        true_hs = truth.true_events.hs_times
        assert ev.hs_times.size >= 4
        for ht in ev.hs_times:
            assert np.min(np.abs(true_hs - ht)) <= 0.01

    def test_all_false_mask(self):
        feet = _speed_trajectory(np.sin(np.arange(500) * 0.05))
        ev = detect_events(feet, np.zeros(500, dtype=bool))
        assert ev.n_events == 0

    def test_mask_length_mismatch(self):
        feet = _speed_trajectory(np.ones(100))
        with pytest.raises(ValueError):
            detect_events(feet, np.ones(99, dtype=bool))


class TestEstimateParameters:
    def test_hand_worked_example(self):
        ev = GaitEvents(
            hs_times=[0.0, 0.55, 1.10], hs_ranges=[2.0, 2.66, 3.32],
            hs_segments=[0, 0, 0],
            to_times=[0.11, 0.66, 1.21], to_ranges=[2.0, 2.66, 3.32],
            to_segments=[0, 0, 0],
        )
        pp = estimate_parameters(ev)
        assert pp.n_strides == 1
        assert pp.stride_time[0] == pytest.approx(1.10)
        assert pp.stride_length[0] == pytest.approx(1.32)
        assert pp.walking_speed[0] == pytest.approx(1.2)
        assert pp.stance_time[0] == pytest.approx(0.66)
        assert pp.swing_time[0] == pytest.approx(0.44)

    def test_single_hs_pair_no_strides(self):
        ev = GaitEvents(hs_times=[0.0, 0.55], hs_ranges=[2.0, 2.66],
                        hs_segments=[0, 0], to_times=[], to_ranges=[],
                        to_segments=[])
        assert estimate_parameters(ev).n_strides == 0

    def test_no_stride_spans_segments(self):
        ev = GaitEvents(
            hs_times=[0.0, 0.55, 1.10, 10.0, 10.55, 11.10],
            hs_ranges=[2.0, 2.6, 3.2, 3.2, 2.6, 2.0],
            hs_segments=[0, 0, 0, 1, 1, 1],
            to_times=[0.1, 0.65, 1.2, 10.1, 10.65, 11.2],
            to_ranges=[2.0, 2.6, 3.2, 3.2, 2.6, 2.0],
            to_segments=[0, 0, 0, 1, 1, 1],
        )
        pp = estimate_parameters(ev)
        assert pp.n_strides == 2
        assert np.all(pp.stride_time < 5.0)

    def test_partition_machine_precision(self):
        truth = simulate_walk(GaitModel(trial_duration=30.0), seed=8)
        pp = estimate_parameters(truth.true_events)
        assert pp.n_strides > 4
        np.testing.assert_array_equal(pp.stance_time + pp.swing_time,
                                      pp.stride_time)

    def test_non_interleaved_rejected(self):
        ev = GaitEvents(hs_times=[0.5, 1.0], hs_ranges=[2.0, 2.5],
                        hs_segments=[0, 0], to_times=[0.1, 0.7],
                        to_ranges=[2.0, 2.4], to_segments=[0, 0])
        with pytest.raises(ValueError, match="interleaved"):
            estimate_parameters(ev)

    def test_warns_on_sparse_segment(self):
        ev = GaitEvents(hs_times=[1.0], hs_ranges=[2.0], hs_segments=[0],
                        to_times=[], to_ranges=[], to_segments=[])
        with pytest.warns(UserWarning, match="fewer than 2"):
            estimate_parameters(ev)
