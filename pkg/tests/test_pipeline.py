"""End-to-end pipeline and evaluation tests on simulated traces."""
import pytest

from csi_vitals_cli.channel_model import synthesize_trace
from csi_vitals_cli.dsp import BREATHING_BAND, RateEstimate, bandpass, waveform_metrics
from csi_vitals_cli.errors import ValidationError
from csi_vitals_cli.pipeline import (
    Diagnostics,
    PipelineConfig,
    VitalReport,
    VitalWindow,
    denoised_amplitude,
    evaluate_against_truth,
    run_pipeline,
)
from csi_vitals_cli.segmentation import MotionSegment, SegmentLabel
from csi_vitals_cli.trace_io import GroundTruth


def report_with(bpms, duration_s=60.0, segments=None):
    windows = tuple(
        VitalWindow(5.0 * i, 5.0 * i + 30.0, RateEstimate(bpm, bpm / 60.0, 20.0), None)
        for i, bpm in enumerate(bpms)
    )
    return VitalReport(
        windows=windows,
        segments=segments or (MotionSegment(0, int(duration_s * 100), SegmentLabel.VITAL),),
        selected_subcarrier=0,
        sample_rate=100.0,
        duration_s=duration_s,
        diagnostics=Diagnostics((), ()),
    )


class TestPipelineConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"window_s": 5.0}, {"step_s": 0.0}, {"step_s": 40.0}, {"gate_ratio": -1.0}]
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            PipelineConfig(**kwargs)


class TestRunPipeline:
    def test_breathing_and_heart_rates(self, make_scenario):
        scenario = make_scenario(duration=120.0, k_factor=52.0, noise_sigma=2e-4)
        trace, _ = synthesize_trace(scenario)
        report = run_pipeline(trace)

        assert report.motion_segments == []
        assert len(report.windows) == (120 - 30) // 5 + 1
        for window in report.windows:
            assert window.breathing.bpm == pytest.approx(18.0, abs=0.5)
            assert window.heart.bpm == pytest.approx(72.0, abs=3.5)
        assert 0 <= report.selected_subcarrier < 8
        assert len(report.diagnostics.k_estimate) == 1
        assert len(report.diagnostics.subcarrier_variance) == 8

    def test_empty_room_reports_no_rates(self, make_scenario):
        scenario = make_scenario(breathing=(0.0, 0.0), heartbeat=(0.0, 0.0))
        trace, _ = synthesize_trace(scenario)
        report = run_pipeline(trace)
        assert len(report.windows) == 7
        assert all(w.breathing is None and w.heart is None for w in report.windows)

    def test_windows_avoid_motion(self, make_scenario):
        trace, truth = synthesize_trace(
            make_scenario(duration=90.0, events=[(30, 35, 0.02)], heartbeat=(0.0, 0.0))
        )
        report = run_pipeline(trace)

        assert len(report.motion_segments) == 1
        assert report.windows
        for window in report.windows:
            assert window.end_s <= 30.0 or window.start_s >= 35.0
            assert any(
                s.start / 100.0 <= window.start_s and window.end_s <= s.end / 100.0
                for s in report.vital_segments
            )
            assert window.breathing.bpm == pytest.approx(18.0, abs=0.5)

        (boundary,) = evaluate_against_truth(report, truth).boundary_errors
        assert boundary.detected
        assert abs(boundary.start_error_s) <= 1.0
        assert abs(boundary.end_error_s) <= 1.0

    def test_windows_sit_on_the_step_grid(self, make_scenario):
        trace, _ = synthesize_trace(make_scenario(duration=50.0))
        report = run_pipeline(trace, PipelineConfig(window_s=20.0, step_s=10.0))
        assert [(w.start_s, w.end_s) for w in report.windows] == [
            (0.0, 20.0),
            (10.0, 30.0),
            (20.0, 40.0),
            (30.0, 50.0),
        ]

    def test_trace_shorter_than_a_window_rejected(self, make_scenario):
        trace, _ = synthesize_trace(make_scenario(duration=20.0))
        with pytest.raises(ValidationError, match="shorter than one"):
            run_pipeline(trace)

    def test_lower_k_factor_senses_better(self, make_scenario):
        evaluations, swings = [], []
        for k in (201.1, 12.4):
            scenario = make_scenario(k_factor=k, noise_sigma=2e-3, heartbeat=(0.0, 0.0))
            trace, truth = synthesize_trace(scenario)
            report = run_pipeline(trace)
            evaluations.append(evaluate_against_truth(report, truth).breathing)

            _, denoised = denoised_amplitude(trace)
            breathing = bandpass(denoised, BREATHING_BAND)
            swings.append(waveform_metrics(breathing, 1 / 0.3).mean_amplitude_difference)

        line_of_sight, blocked = evaluations
        assert swings[1] > swings[0]
        assert blocked.window_count == 7
        assert blocked.mean_abs_error_bpm <= 0.5
        assert line_of_sight.window_count < blocked.window_count or (
            line_of_sight.mean_abs_error_bpm > blocked.mean_abs_error_bpm
        )


class TestEvaluate:
    truth = GroundTruth(0.3, None, [], 60.0)

    def test_perfect_estimates(self):
        score = evaluate_against_truth(report_with([18.0, 18.0]), self.truth).breathing
        assert score.window_count == 2
        assert score.mean_abs_error_bpm == 0.0
        assert score.accuracy_percent == pytest.approx(100.0)

    def test_constant_bias(self):
        score = evaluate_against_truth(report_with([18.5]), self.truth).breathing
        assert score.mean_abs_error_bpm == pytest.approx(0.5)
        assert score.accuracy_percent == pytest.approx(97.2222, abs=1e-4)

    def test_no_windows(self):
        result = evaluate_against_truth(report_with([]), self.truth)
        assert result.breathing.window_count == 0
        assert result.breathing.mean_abs_error_bpm is None
        assert result.breathing.accuracy_percent is None

    def test_absent_truth_rate_is_not_scored(self):
        score = evaluate_against_truth(report_with([18.0]), self.truth).heart
        assert score.window_count == 0 and score.mean_abs_error_bpm is None

    def test_duration_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="ground truth covers"):
            evaluate_against_truth(report_with([18.0], duration_s=90.0), self.truth)

    def test_boundary_errors(self):
        segments = (
            MotionSegment(0, 3000, SegmentLabel.VITAL),
            MotionSegment(3000, 3550, SegmentLabel.OTHER_MOTION),
            MotionSegment(3550, 6000, SegmentLabel.VITAL),
        )
        truth = GroundTruth(0.3, None, [(30.0, 35.0), (45.0, 50.0)], 60.0)
        result = evaluate_against_truth(report_with([], segments=segments), truth)
        hit, miss = result.boundary_errors
        assert hit.start_error_s == pytest.approx(0.0)
        assert hit.end_error_s == pytest.approx(0.5)
        assert not miss.detected and miss.end_error_s is None

