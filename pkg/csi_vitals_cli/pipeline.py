"""End-to-end vital-sign extraction and scoring against simulator truth."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .channel_model import MIN_K_SAMPLES, estimate_ricean_k
from .dsp import (
    BREATHING_BAND,
    HEART_BAND,
    AmplitudeSeries,
    BandSpec,
    RateEstimate,
    amplitude_series,
    bandpass,
    estimate_rate_fft,
    hampel_filter,
    select_subcarrier,
    subcarrier_variances,
)
from .errors import ValidationError
from .segmentation import MotionSegment, SegmentationConfig, SegmentLabel, segment_trace
from .trace_io import CsiTrace, GroundTruth

logger = logging.getLogger(__name__)

MIN_WINDOW_S = 10.0


@dataclass(frozen=True)
class PipelineConfig:
    breathing_band: BandSpec = BREATHING_BAND
    heart_band: BandSpec = HEART_BAND
    window_s: float = 30.0
    step_s: float = 5.0
    gate_ratio: float = 5.0
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    stream: int = 0

    def __post_init__(self):
        if self.window_s < MIN_WINDOW_S:
            raise ValidationError(f"window_s must be >= {MIN_WINDOW_S:g}, got {self.window_s}")
        if not 0 < self.step_s <= self.window_s:
            raise ValidationError(
                f"step_s must be in (0, window_s={self.window_s}], got {self.step_s}"
            )
        if self.gate_ratio < 0:
            raise ValidationError(f"gate_ratio must be >= 0, got {self.gate_ratio}")


@dataclass(frozen=True)
class VitalWindow:
    start_s: float
    end_s: float
    breathing: Optional[RateEstimate]
    heart: Optional[RateEstimate]


@dataclass(frozen=True)
class Diagnostics:
    k_estimate: Tuple[float, ...]
    subcarrier_variance: Tuple[float, ...]


@dataclass(frozen=True)
class VitalReport:
    windows: Tuple[VitalWindow, ...]
    segments: Tuple[MotionSegment, ...]
    selected_subcarrier: int
    sample_rate: float
    duration_s: float
    diagnostics: Diagnostics

    @property
    def vital_segments(self) -> List[MotionSegment]:
        return [s for s in self.segments if s.label is SegmentLabel.VITAL]

    @property
    def motion_segments(self) -> List[MotionSegment]:
        return [s for s in self.segments if s.label is SegmentLabel.OTHER_MOTION]


@dataclass(frozen=True)
class VitalScore:
    window_count: int
    mean_abs_error_bpm: Optional[float]
    accuracy_percent: Optional[float]


@dataclass(frozen=True)
class BoundaryError:
    true_start_s: float
    true_end_s: float
    start_error_s: Optional[float]
    end_error_s: Optional[float]

    @property
    def detected(self) -> bool:
        return self.start_error_s is not None


@dataclass(frozen=True)
class Evaluation:
    breathing: VitalScore
    heart: VitalScore
    boundary_errors: Tuple[BoundaryError, ...]


def _present(estimate: RateEstimate) -> Optional[RateEstimate]:
    return estimate if estimate.present else None


def _segment_windows(
    segment: MotionSegment, denoised: AmplitudeSeries, cfg: PipelineConfig
) -> List[VitalWindow]:
    fs = denoised.sample_rate
    window_len = int(round(cfg.window_s * fs))
    if len(segment) < window_len:
        return []

    part = denoised.slice(segment.start, segment.end)
    breathing = bandpass(part, cfg.breathing_band)
    heart = bandpass(part, cfg.heart_band)

    windows = []
    k = math.ceil(segment.start / (cfg.step_s * fs) - 1e-9)
    while True:
        start = int(round(k * cfg.step_s * fs))
        end = start + window_len
        if end > segment.end:
            break
        if start >= segment.start:
            lo, hi = start - segment.start, end - segment.start
            breath_rate = estimate_rate_fft(
                breathing.slice(lo, hi), cfg.breathing_band, cfg.gate_ratio
            )
            heart_rate = estimate_rate_fft(heart.slice(lo, hi), cfg.heart_band, cfg.gate_ratio)
            windows.append(
                VitalWindow(start / fs, end / fs, _present(breath_rate), _present(heart_rate))
            )
        k += 1
    return windows


def denoised_amplitude(trace: CsiTrace, stream: int = 0) -> Tuple[int, AmplitudeSeries]:
    """Selected subcarrier and its Hampel-filtered amplitude."""
    subcarrier = select_subcarrier(trace, stream)
    return subcarrier, hampel_filter(amplitude_series(trace, stream, subcarrier))


def segment_series(
    denoised: AmplitudeSeries, segmentation: SegmentationConfig
) -> List[MotionSegment]:
    """Segment with packet counts rescaled to the series rate.

    Series too short for one profile window come back as a single Vital segment.
    """
    seg_cfg = segmentation.for_sample_rate(denoised.sample_rate)
    if len(denoised) < 2 * seg_cfg.init_window_len:
        return [MotionSegment(0, len(denoised), SegmentLabel.VITAL)]
    return segment_trace(denoised, seg_cfg)


def run_pipeline(trace: CsiTrace, cfg: Optional[PipelineConfig] = None) -> VitalReport:
    """Select a subcarrier, segment out body motion and estimate rates per window."""
    cfg = cfg or PipelineConfig()
    fs = trace.sample_rate
    if trace.n_frames == 0 or trace.duration_s < cfg.window_s:
        raise ValidationError(
            f"trace of {trace.duration_s:.2f} s is shorter than one {cfg.window_s:g} s window"
        )
    cfg.breathing_band.check(fs)
    cfg.heart_band.check(fs)

    subcarrier, denoised = denoised_amplitude(trace, cfg.stream)
    variances = subcarrier_variances(trace, cfg.stream)
    if trace.n_frames >= MIN_K_SAMPLES:
        k_estimate = tuple(
            estimate_ricean_k(trace, s, subcarrier) for s in range(trace.n_streams)
        )
    else:
        logger.warning("Trace too short for K estimation (%d frames)", trace.n_frames)
        k_estimate = ()

    segments = segment_series(denoised, cfg.segmentation)

    windows: List[VitalWindow] = []
    for segment in segments:
        if segment.label is SegmentLabel.VITAL:
            windows.extend(_segment_windows(segment, denoised, cfg))

    logger.info(
        "Subcarrier %d: %d segments, %d windows",
        subcarrier,
        len(segments),
        len(windows),
    )
    return VitalReport(
        windows=tuple(windows),
        segments=tuple(segments),
        selected_subcarrier=subcarrier,
        sample_rate=fs,
        duration_s=trace.duration_s,
        diagnostics=Diagnostics(
            k_estimate=k_estimate,
            subcarrier_variance=tuple(float(v) for v in variances),
        ),
    )


def _score(estimates: List[Optional[RateEstimate]], truth_hz: Optional[float]) -> VitalScore:
    rates = [e.bpm for e in estimates if e is not None and e.bpm is not None]
    if truth_hz is None or not rates:
        return VitalScore(window_count=len(rates), mean_abs_error_bpm=None, accuracy_percent=None)
    truth_bpm = 60.0 * truth_hz
    errors = [abs(bpm - truth_bpm) for bpm in rates]
    return VitalScore(
        window_count=len(rates),
        mean_abs_error_bpm=sum(errors) / len(errors),
        accuracy_percent=sum((1.0 - e / truth_bpm) * 100.0 for e in errors) / len(errors),
    )


def _boundary_error(
    event: Tuple[float, float], detected: List[Tuple[float, float]]
) -> BoundaryError:
    true_start, true_end = event
    best, best_overlap = None, 0.0
    for start, end in detected:
        overlap = min(end, true_end) - max(start, true_start)
        if overlap > best_overlap:
            best, best_overlap = (start, end), overlap
    if best is None:
        return BoundaryError(true_start, true_end, None, None)
    return BoundaryError(true_start, true_end, best[0] - true_start, best[1] - true_end)


def evaluate_against_truth(report: VitalReport, truth: GroundTruth) -> Evaluation:
    """Score a report against the ground truth of the trace it was computed from."""
    tolerance = 1.0 / report.sample_rate + 1e-9
    if abs(report.duration_s - truth.duration_s) > tolerance:
        raise ValidationError(
            f"report covers {report.duration_s:.3f} s but ground truth covers "
            f"{truth.duration_s:.3f} s"
        )
    if any(w.end_s > truth.duration_s + tolerance for w in report.windows):
        raise ValidationError("report windows extend past the ground-truth duration")

    fs = report.sample_rate
    detected = [(s.start / fs, s.end / fs) for s in report.motion_segments]
    return Evaluation(
        breathing=_score([w.breathing for w in report.windows], truth.breathing_freq_hz),
        heart=_score([w.heart for w in report.windows], truth.heart_freq_hz),
        boundary_errors=tuple(_boundary_error(e, detected) for e in truth.motion_events),
    )
