"""Tests for the MED regularity profile and motion segmentation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csi_vitals_cli.channel_model import synthesize_trace
from csi_vitals_cli.dsp import AmplitudeSeries
from csi_vitals_cli.errors import ValidationError
from csi_vitals_cli.pipeline import denoised_amplitude, segment_series
from csi_vitals_cli.segmentation import (
    ActivationAt,
    Continue,
    MotionSegment,
    MovingAverage,
    RegularityProfile,
    SegmentationConfig,
    SegmentLabel,
    _min_distance,
    detect_activation,
    locate_start,
    min_euclidean_distance,
    regularity_profile,
    segment_trace,
)

FS = 100.0
CFG_100HZ = SegmentationConfig().for_sample_rate(FS)


def series(values, fs=FS):
    return AmplitudeSeries(np.asarray(values, dtype=float), fs)


def brute_force_med(history, query, stride=1):
    m = query.size
    return min(
        np.linalg.norm(history[i : i + m] - query) for i in range(0, history.size - m + 1, stride)
    )


def segments_for(make_scenario, **kwargs):
    trace, truth = synthesize_trace(make_scenario(**kwargs))
    _, denoised = denoised_amplitude(trace)
    return segment_trace(denoised, CFG_100HZ), truth


class TestSegmentationConfig:
    def test_rescaled_to_sample_rate(self):
        assert CFG_100HZ.init_window_len == 200
        assert CFG_100HZ.step == 10
        assert CFG_100HZ.tp_wep_gap == 2
        assert CFG_100HZ.tp_step == 1
        assert CFG_100HZ.tp_iterations == 50
        assert CFG_100HZ.med_stride == 1
        assert CFG_100HZ.max_history_len == 3000

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"activation_factor": 1.0},
            {"step": 0},
            {"init_window_len": 0},
            {"init_window_len": 2000, "max_history_len": 1000},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            SegmentationConfig(**kwargs)


class TestMinEuclideanDistance:
    def test_exact_copy_has_zero_distance(self):
        history = np.random.default_rng(0).standard_normal(500)
        assert min_euclidean_distance(series(history), series(history[123:223])) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_zeros_against_ones(self):
        assert min_euclidean_distance(series(np.zeros(100)), series(np.ones(100))) == pytest.approx(
            10.0
        )

    def test_query_longer_than_history_rejected(self):
        with pytest.raises(ValidationError):
            min_euclidean_distance(series(np.zeros(10)), series(np.zeros(11)))

    @given(st.integers(0, 2**32 - 1), st.integers(5, 40), st.integers(0, 200), st.integers(2, 12))
    @settings(max_examples=50)
    def test_coarser_stride_never_finds_a_closer_match(self, seed, m, extra, stride):
        rng = np.random.default_rng(seed)
        history, query = rng.standard_normal(m + extra), rng.standard_normal(m)
        fine = _min_distance(history, query, 1)
        coarse = _min_distance(history, query, stride)
        assert fine <= coarse
        assert fine == pytest.approx(brute_force_med(history, query), rel=1e-9)

    @pytest.mark.parametrize("stride", [1, 7])
    def test_fft_path_matches_brute_force(self, stride):
        rng = np.random.default_rng(5)
        history = 3.0 + rng.standard_normal(5000)
        query = history[1234:1434] + 0.01 * rng.standard_normal(200)
        assert _min_distance(history, query, stride) == pytest.approx(
            brute_force_med(history, query, stride), rel=1e-9
        )


class TestRegularityProfile:
    def test_length_and_positions(self):
        cfg = SegmentationConfig(init_window_len=100, step=30)
        profile = regularity_profile(series(np.random.default_rng(1).standard_normal(1000)), cfg)
        assert len(profile) == (1000 - 200) // 30 + 1
        assert profile.positions[0] == 200
        assert np.all(np.diff(profile.positions) == 30)

    def test_periodic_series_has_near_zero_med(self):
        x = np.sin(2 * np.pi * np.arange(1000) / 50)
        cfg = SegmentationConfig(init_window_len=200, step=10)
        profile = regularity_profile(series(x), cfg)
        assert np.all(profile.values < 1e-6 * np.linalg.norm(x[:200]))

    def test_burst_raises_med_after_onset(self):
        rng = np.random.default_rng(2)
        x = np.sin(2 * np.pi * np.arange(1000) / 50) + 0.01 * rng.standard_normal(1000)
        x[600:700] += np.cumsum(rng.standard_normal(100))
        cfg = SegmentationConfig(init_window_len=100, step=10)
        profile = regularity_profile(series(x), cfg)
        assert profile.positions[np.argmax(profile.values)] >= 600

    def test_history_is_capped_at_lookback(self):
        x = np.random.default_rng(3).standard_normal(1000)
        cfg = SegmentationConfig(init_window_len=100, step=50, max_history_len=300)
        profile = regularity_profile(series(x), cfg)
        for position, value in profile.pairs():
            split = position - 100
            expected = brute_force_med(x[max(0, split - 300) : split], x[split:position])
            assert value == pytest.approx(expected, rel=1e-9)

    def test_series_shorter_than_two_windows_rejected(self):
        with pytest.raises(ValidationError):
            regularity_profile(series(np.zeros(399)), SegmentationConfig(init_window_len=200))

    def test_value_at(self):
        profile = RegularityProfile(np.array([10, 20]), np.array([1.0, 2.0]))
        assert profile.value_at(20) == 2.0
        assert profile.pairs() == [(10, 1.0), (20, 2.0)]
        with pytest.raises(ValidationError):
            profile.value_at(15)


class TestDetectActivation:
    def test_fires_above_threshold(self):
        ma = MovingAverage(3.0, 3)
        assert detect_activation(120, 2.6, ma, 2.5) == ActivationAt(120)

    def test_below_threshold_extends_average(self):
        result = detect_activation(120, 2.4, MovingAverage(1.0, 1), 2.5)
        assert isinstance(result, Continue)
        assert result.ma.count == 2
        assert result.ma.mean == pytest.approx(1.7)

    def test_first_value_only_seeds(self):
        result = detect_activation(120, 1e9, MovingAverage(), 2.5)
        assert result == Continue(MovingAverage(1e9, 1))

    def test_empty_average_has_no_mean(self):
        with pytest.raises(ValidationError):
            MovingAverage().mean


class TestLocateStart:
    cfg = SegmentationConfig(init_window_len=100, step=10, tp_wep_gap=20, tp_step=10)

    def test_finds_constructed_knee(self):
        positions = np.arange(0, 1001, 10)
        values = np.where(positions <= 600, 1.0, 5.0)
        values[positions == 610] = 3.0
        profile = RegularityProfile(positions, values)
        assert locate_start(profile, 700, self.cfg).position == 600

    def test_flat_profile_ties_go_to_earliest_candidate(self):
        positions = np.arange(0, 1001, 10)
        profile = RegularityProfile(positions, np.full(positions.size, 2.0))
        start = locate_start(profile, 700, self.cfg)
        assert start.position == 700 - 50 * 10
        assert not start.insufficient_history
        assert len(start.distances) == 50

    def test_insufficient_history(self):
        positions = np.arange(0, 1001, 10)
        profile = RegularityProfile(positions, np.ones(positions.size))
        start = locate_start(profile, 300, self.cfg)
        assert start.position == 0
        assert start.insufficient_history


class TestSegmentTrace:
    def test_breathing_only_is_one_vital_segment(self, make_scenario):
        segments, _ = segments_for(make_scenario, duration=60.0)
        assert segments == [MotionSegment(0, 6000, SegmentLabel.VITAL)]

    def test_one_event_gives_three_segments(self, make_scenario):
        segments, _ = segments_for(make_scenario, duration=90.0, events=[(30, 35, 0.02)])
        labels = [s.label for s in segments]
        assert labels == [SegmentLabel.VITAL, SegmentLabel.OTHER_MOTION, SegmentLabel.VITAL]
        motion = segments[1]
        assert abs(motion.start / FS - 30.0) <= 1.0
        assert abs(motion.end / FS - 35.0) <= 1.0

    def test_two_events_give_five_segments(self, make_scenario):
        segments, truth = segments_for(
            make_scenario, duration=100.0, events=[(25, 30, 0.02), (60, 65, 0.02)]
        )
        assert [s.label for s in segments] == [
            SegmentLabel.VITAL,
            SegmentLabel.OTHER_MOTION,
            SegmentLabel.VITAL,
            SegmentLabel.OTHER_MOTION,
            SegmentLabel.VITAL,
        ]
        for (start, end), detected in zip(truth.motion_events, segments[1::2]):
            assert abs(detected.start / FS - start) <= 1.0
            assert abs(detected.end / FS - end) <= 1.0

    def test_segments_partition_the_series(self, make_scenario):
        segments, _ = segments_for(make_scenario, duration=70.0, events=[(40, 44, 0.02)])
        assert segments[0].start == 0
        assert segments[-1].end == 7000
        assert all(a.end == b.start for a, b in zip(segments, segments[1:]))
        assert all(a.label != b.label for a, b in zip(segments, segments[1:]))

    def test_reproducible(self, make_scenario):
        first, _ = segments_for(make_scenario, duration=60.0, events=[(30, 34, 0.02)])
        second, _ = segments_for(make_scenario, duration=60.0, events=[(30, 34, 0.02)])
        assert first == second

    def test_higher_activation_factor_never_adds_segments(self, make_scenario):
        trace, _ = synthesize_trace(make_scenario(duration=60.0, events=[(30, 34, 0.02)]))
        _, denoised = denoised_amplitude(trace)
        counts = []
        for v in (2.5, 4.0, 8.0):
            cfg = SegmentationConfig(activation_factor=v).for_sample_rate(FS)
            segments = segment_trace(denoised, cfg)
            counts.append(sum(s.label is SegmentLabel.OTHER_MOTION for s in segments))
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 1

    def test_short_series_is_one_vital_segment(self):
        assert segment_series(series(np.ones(300)), SegmentationConfig()) == [
            MotionSegment(0, 300, SegmentLabel.VITAL)
        ]

    def test_invalid_segment_rejected(self):
        with pytest.raises(ValidationError):
            MotionSegment(5, 5, SegmentLabel.VITAL)
