"""Regularity-based motion segmentation.

Breathing is regular: a window of the amplitude waveform (B) has a close
match somewhere in the waveform that precedes it (A). Body motion is not,
so the minimum Euclidean distance (MED) between B and every equal-length
subsequence of A jumps when motion enters B. A grows from the segment start
up to a fixed lookback and then slides along with B. The MED profile is scanned
for an activation point, the motion start is positioned with an auxiliary
baseline-then-ramp waveform, and the motion end is positioned by running
the same search on the time-reversed waveform.

All positions are sample indices local to the series being segmented.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from .dsp import AmplitudeSeries
from .errors import InvariantError, ValidationError

logger = logging.getLogger(__name__)

# Packet counts in SegmentationConfig are defined at this packet rate.
REFERENCE_RATE_HZ = 1000.0
# Above this many multiply-adds per MED call, distances come from an FFT correlation.
DIRECT_MED_LIMIT = 65536
# Reversed-span margin after the settle point, in initial window lengths.
END_SEARCH_MARGIN = 3


@dataclass(frozen=True)
class SegmentationConfig:
    init_window_len: int = 2000
    step: int = 100
    activation_factor: float = 2.5
    tp_wep_gap: int = 20
    tp_step: int = 10
    tp_iterations: int = 50
    med_stride: int = 1
    max_history_len: int = 30000

    def __post_init__(self):
        counts = (
            "init_window_len",
            "step",
            "tp_wep_gap",
            "tp_step",
            "tp_iterations",
            "med_stride",
            "max_history_len",
        )
        for name in counts:
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.activation_factor > 1:
            raise ValidationError(
                f"activation_factor must be > 1, got {self.activation_factor}"
            )
        if self.max_history_len < self.init_window_len:
            raise ValidationError(
                f"max_history_len ({self.max_history_len}) must be >= init_window_len "
                f"({self.init_window_len})"
            )

    def for_sample_rate(self, sample_rate: float) -> "SegmentationConfig":
        """Rescale packet counts from the 1000 Hz reference to another packet rate."""
        scale = sample_rate / REFERENCE_RATE_HZ

        def scaled(count: int) -> int:
            return max(1, int(round(count * scale)))

        return replace(
            self,
            init_window_len=scaled(self.init_window_len),
            step=scaled(self.step),
            tp_wep_gap=scaled(self.tp_wep_gap),
            tp_step=scaled(self.tp_step),
            med_stride=scaled(self.med_stride),
            max_history_len=scaled(self.max_history_len),
        )


@dataclass(frozen=True, eq=False)
class RegularityProfile:
    """MED values recorded at the exclusive end index of window B."""

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if positions.shape != values.shape or positions.ndim != 1:
            raise ValidationError("profile positions and values must be 1-D and equally long")
        if np.any(np.diff(positions) <= 0):
            raise ValidationError("profile positions must be strictly increasing")
        if np.any(values < 0):
            raise ValidationError("MED values must be >= 0")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.positions.size

    def pairs(self) -> List[Tuple[int, float]]:
        return list(zip(self.positions.tolist(), self.values.tolist()))

    def value_at(self, position: int) -> float:
        idx = int(np.searchsorted(self.positions, position))
        if idx >= self.positions.size or self.positions[idx] != position:
            raise ValidationError(f"position {position} is not in the profile")
        return float(self.values[idx])


class SegmentLabel(str, Enum):
    VITAL = "Vital"
    OTHER_MOTION = "OtherMotion"


@dataclass(frozen=True)
class MotionSegment:
    start: int
    end: int
    label: SegmentLabel

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"segment needs 0 <= start < end, got [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class MovingAverage:
    """Running mean of the MED values accepted as regular."""

    total: float = 0.0
    count: int = 0

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValidationError("moving average is empty")
        return self.total / self.count

    def add(self, value: float) -> "MovingAverage":
        return MovingAverage(self.total + value, self.count + 1)


@dataclass(frozen=True)
class Continue:
    ma: MovingAverage


@dataclass(frozen=True)
class ActivationAt:
    position: int


Activation = Union[Continue, ActivationAt]


@dataclass(frozen=True)
class StartPoint:
    position: int
    insufficient_history: bool = False
    distances: Optional[Tuple[float, ...]] = field(default=None, compare=False)


def _min_distance(history: np.ndarray, query: np.ndarray, stride: int) -> float:
    m, n = query.size, history.size
    if m == 0:
        raise ValidationError("query must be nonempty")
    if m > n:
        raise ValidationError(f"query of {m} samples is longer than history of {n}")
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")

    # Distances are shift invariant; centering keeps the FFT path precise.
    center = query.mean()
    history = history - center
    query = query - center
    n_offsets = (n - m) // stride + 1

    if n_offsets * m <= DIRECT_MED_LIMIT:
        windows = sliding_window_view(history, m)[::stride]
        return float(np.sqrt(np.min(np.sum((windows - query) ** 2, axis=1))))

    corr = scipy.signal.correlate(history, query, mode="valid", method="fft")
    energy = np.concatenate(([0.0], np.cumsum(history * history)))
    window_energy = energy[m:] - energy[:-m]
    squared = (window_energy - 2.0 * corr + np.dot(query, query))[::stride]
    best = int(np.argmin(squared)) * stride
    diff = history[best : best + m] - query
    return float(np.sqrt(np.dot(diff, diff)))


def min_euclidean_distance(
    history: AmplitudeSeries, query: AmplitudeSeries, stride: int = 1
) -> float:
    """Smallest Euclidean distance between ``query`` and any equal-length
    subsequence of ``history`` starting at a multiple of ``stride``."""
    return _min_distance(history.samples, query.samples, stride)


def iter_regularity(
    samples: np.ndarray, cfg: SegmentationConfig, start: int = 0
) -> Iterator[Tuple[int, float]]:
    """Yield (position, MED) while window A grows and window B slides by ``cfg.step``.

    Window A keeps at most ``cfg.max_history_len`` samples, so each MED call costs
    the same however long the series is.
    """
    n = samples.size
    length = cfg.init_window_len
    split = start + length
    while split + length <= n:
        history = samples[max(start, split - cfg.max_history_len) : split]
        query = samples[split : split + length]
        yield split + length, _min_distance(history, query, cfg.med_stride)
        split += cfg.step


def regularity_profile(series: AmplitudeSeries, cfg: SegmentationConfig) -> RegularityProfile:
    if len(series) < 2 * cfg.init_window_len:
        raise ValidationError(
            f"series of {len(series)} samples is shorter than two windows "
            f"({2 * cfg.init_window_len})"
        )
    pairs = list(iter_regularity(series.samples, cfg))
    return RegularityProfile(
        positions=np.array([p for p, _ in pairs], dtype=np.int64),
        values=np.array([v for _, v in pairs], dtype=np.float64),
    )


def detect_activation(
    position: int, med: float, ma: MovingAverage, activation_factor: float
) -> Activation:
    """Flag ``position`` when its MED exceeds ``activation_factor`` times the MA mean.

    The first value only seeds the average.
    """
    if ma.count > 0 and med > activation_factor * ma.mean:
        return ActivationAt(position)
    return Continue(ma.add(med))


def locate_start(
    profile: RegularityProfile, pap: int, cfg: SegmentationConfig
) -> StartPoint:
    """Position the motion start before an activation point.

    Each candidate turning point TP gets an auxiliary waveform that holds the
    mean MED before TP, rises linearly to MED(pap) over ``tp_wep_gap`` samples
    and then holds. The candidate whose waveform is closest to the profile
    (interpolated onto every sample of the search support) wins; ties go to
    the earliest candidate.
    """
    med_pap = profile.value_at(pap)
    earliest = pap - cfg.tp_iterations * cfg.tp_step
    if earliest < int(profile.positions[0]):
        logger.debug("Activation at %d has too little history, using %d", pap, profile.positions[0])
        return StartPoint(int(profile.positions[0]), insufficient_history=True)

    grid = np.arange(earliest, pap + 1)
    actual = np.interp(grid, profile.positions, profile.values)

    candidates = [pap - k * cfg.tp_step for k in range(cfg.tp_iterations, 0, -1)]
    distances = []
    for tp in candidates:
        offset = tp - earliest
        baseline = actual[:offset].mean() if offset > 0 else actual[offset]
        ramp = np.clip((grid - tp) / cfg.tp_wep_gap, 0.0, 1.0)
        auxiliary = baseline + (med_pap - baseline) * ramp
        distances.append(float(np.sqrt(np.sum((auxiliary - actual) ** 2))))

    eds = np.array(distances)
    tolerance = 1e-9 * (float(np.abs(actual).max()) + 1e-300) * np.sqrt(grid.size)
    best = int(np.flatnonzero(eds <= eds.min() + tolerance)[0])
    return StartPoint(candidates[best], distances=tuple(distances))


def _find_onset(
    samples: np.ndarray, cfg: SegmentationConfig, start: int
) -> Optional[Tuple[int, MovingAverage]]:
    """Scan from ``start`` for the next activation; returns (motion start, pre-motion MA)."""
    ma = MovingAverage()
    positions: List[int] = []
    values: List[float] = []
    for position, med in iter_regularity(samples, cfg, start):
        positions.append(position)
        values.append(med)
        result = detect_activation(position, med, ma, cfg.activation_factor)
        if isinstance(result, ActivationAt):
            profile = RegularityProfile(np.array(positions), np.array(values))
            located = locate_start(profile, position, cfg)
            logger.debug("Activation at %d, start located at %d", position, located.position)
            return located.position, ma
        ma = result.ma
    return None


def _locate_end(
    samples: np.ndarray, start: int, ma: MovingAverage, cfg: SegmentationConfig
) -> int:
    n = samples.size
    threshold = cfg.activation_factor * ma.mean
    settle = None
    for position, med in iter_regularity(samples, cfg, start):
        if med <= threshold:
            settle = position
            break
    if settle is None:
        logger.debug("Motion from %d never settles", start)
        return n

    fallback = max(start + 1, settle - 2 * cfg.init_window_len)
    span_end = min(n, settle + END_SEARCH_MARGIN * cfg.init_window_len)
    reversed_span = samples[start:span_end][::-1]
    onset = _find_onset(reversed_span, cfg, 0)
    if onset is None:
        logger.debug("Reversed search found no activation, ending at %d", fallback)
        return fallback

    end = span_end - onset[0]
    if not start < end <= n:
        return fallback
    return end


def _check_partition(segments: Sequence[MotionSegment], n: int) -> None:
    if not segments or segments[0].start != 0 or segments[-1].end != n:
        raise InvariantError(f"segments do not cover [0, {n})")
    for prev, cur in zip(segments, segments[1:]):
        if prev.end != cur.start:
            raise InvariantError(
                f"segments ending at {prev.end} and starting at {cur.start} are not contiguous"
            )


def segment_trace(series: AmplitudeSeries, cfg: SegmentationConfig) -> List[MotionSegment]:
    """Split a series into alternating Vital and OtherMotion segments covering it exactly."""
    x = series.samples
    n = x.size
    segments: List[MotionSegment] = []
    cursor = 0

    while n - cursor >= 2 * cfg.init_window_len:
        onset = _find_onset(x, cfg, cursor)
        if onset is None:
            break
        start, ma = onset
        end = _locate_end(x, start, ma, cfg)
        segments.append(MotionSegment(cursor, start, SegmentLabel.VITAL))
        segments.append(MotionSegment(start, end, SegmentLabel.OTHER_MOTION))
        logger.info(
            "Motion between %.2f s and %.2f s",
            (series.origin_index + start) / series.sample_rate,
            (series.origin_index + end) / series.sample_rate,
        )
        cursor = end

    if cursor < n:
        segments.append(MotionSegment(cursor, n, SegmentLabel.VITAL))
    _check_partition(segments, n)
    return segments
