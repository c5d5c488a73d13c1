"""Monte Carlo acceptance harnesses over seeded simulator scenarios.

These run the full pipeline on hundreds of traces; deselect with -m "not slow".
"""
import time

import numpy as np
import pytest

from csi_vitals_cli.channel_model import MotionEvent, SimScenario, synthesize_trace
from csi_vitals_cli.dsp import BREATHING_BAND, bandpass, waveform_metrics
from csi_vitals_cli.pipeline import (
    PipelineConfig,
    denoised_amplitude,
    evaluate_against_truth,
    run_pipeline,
)
from csi_vitals_cli.segmentation import SegmentationConfig

pytestmark = pytest.mark.slow


def detected_fraction(report):
    if not report.windows:
        return 0.0
    return sum(w.breathing is not None for w in report.windows) / len(report.windows)


def test_rate_accuracy_at_k_52(make_scenario):
    rng = np.random.default_rng(2024)
    breathing_errors, heart_errors = [], []
    for seed in range(50):
        breathing_hz = rng.uniform(16, 28) / 60.0
        heart_hz = rng.uniform(65, 115) / 60.0
        scenario = make_scenario(
            k_factor=52.0,
            breathing=(breathing_hz, 0.002),
            heartbeat=(heart_hz, 0.0003),
            noise_sigma=3e-4,
            seed=seed,
        )
        trace, truth = synthesize_trace(scenario)
        evaluation = evaluate_against_truth(run_pipeline(trace), truth)
        assert evaluation.breathing.window_count > 0
        breathing_errors.append(evaluation.breathing.mean_abs_error_bpm)
        if evaluation.heart.window_count:
            heart_errors.append(evaluation.heart.mean_abs_error_bpm)

    assert np.mean(breathing_errors) <= 0.5
    assert len(heart_errors) >= 40
    assert np.mean(heart_errors) <= 3.5


def test_single_event_boundaries(make_scenario):
    rng = np.random.default_rng(7)
    hits = 0
    for seed in range(100):
        start = rng.uniform(20, 35)
        end = start + rng.uniform(3, 6)
        scenario = make_scenario(events=[(start, end, 0.02)], seed=seed)
        trace, truth = synthesize_trace(scenario)
        report = run_pipeline(trace)

        # The segments always partition the trace.
        assert report.segments[0].start == 0
        assert report.segments[-1].end == trace.n_frames
        assert all(a.end == b.start for a, b in zip(report.segments, report.segments[1:]))

        (boundary,) = evaluate_against_truth(report, truth).boundary_errors
        if (
            boundary.detected
            and abs(boundary.start_error_s) <= 1.0
            and abs(boundary.end_error_s) <= 1.0
        ):
            hits += 1
    assert hits >= 95


@pytest.mark.parametrize("seed", range(10))
def test_single_event_boundaries_at_full_rate(seed):
    scenario = SimScenario(motion_events=(MotionEvent(30.0, 35.0, 0.02),), seed=seed)
    trace, truth = synthesize_trace(scenario)
    (boundary,) = evaluate_against_truth(run_pipeline(trace), truth).boundary_errors
    assert boundary.detected
    assert abs(boundary.start_error_s) <= 0.5
    assert abs(boundary.end_error_s) <= 0.5


def test_empty_room_stays_silent(make_scenario):
    false_positives = 0
    for seed in range(100):
        scenario = make_scenario(breathing=(0.0, 0.0), heartbeat=(0.0, 0.0), seed=seed)
        trace, _ = synthesize_trace(scenario)
        report = run_pipeline(trace)
        if any(w.breathing is not None or w.heart is not None for w in report.windows):
            false_positives += 1
    assert false_positives <= 5


def test_lower_k_factor_never_senses_worse(make_scenario):
    k_factors = (201.1, 52.0, 17.8, 12.4)
    swings, fractions = [], []
    for k in k_factors:
        level_swings, level_fractions = [], []
        for seed in range(10):
            scenario = make_scenario(k_factor=k, heartbeat=(0.0, 0.0), noise_sigma=2e-3, seed=seed)
            trace, _ = synthesize_trace(scenario)
            _, denoised = denoised_amplitude(trace)
            breathing = bandpass(denoised, BREATHING_BAND)
            level_swings.append(waveform_metrics(breathing, 1 / 0.3).mean_amplitude_difference)
            level_fractions.append(detected_fraction(run_pipeline(trace)))
        swings.append(np.mean(level_swings))
        fractions.append(np.mean(level_fractions))

    assert all(a < b for a, b in zip(swings, swings[1:]))
    assert all(b >= a - 0.1 for a, b in zip(fractions, fractions[1:]))


def test_detection_degrades_with_noise(make_scenario):
    fractions = []
    for noise_sigma in (2e-4, 1e-3, 3e-3, 1e-2):
        level = [
            detected_fraction(
                run_pipeline(
                    synthesize_trace(
                        make_scenario(heartbeat=(0.0, 0.0), noise_sigma=noise_sigma, seed=seed)
                    )[0]
                )
            )
            for seed in range(20)
        ]
        fractions.append(np.mean(level))

    assert fractions[0] >= 0.95
    assert all(b <= a + 0.1 for a, b in zip(fractions, fractions[1:]))


def test_half_hour_trace_analyzed_within_a_minute():
    trace, _ = synthesize_trace(SimScenario(duration=1800.0, sample_rate=1000.0, n_subcarriers=30))
    config = PipelineConfig(segmentation=SegmentationConfig(med_stride=10))

    started = time.perf_counter()
    report = run_pipeline(trace, config)
    elapsed = time.perf_counter() - started

    assert report.windows
    assert elapsed < 60.0
