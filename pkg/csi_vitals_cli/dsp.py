"""Per-series signal processing: subcarrier selection, Hampel denoising,
Butterworth band splitting and FFT rate estimation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
import scipy.fft
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError

if TYPE_CHECKING:
    from .trace_io import CsiTrace

logger = logging.getLogger(__name__)

# Gaussian-consistent MAD scale.
MAD_SCALE = 1.4826
MIN_ESTIMATE_DURATION_S = 10.0
MIN_BAND_BINS = 3


@dataclass(frozen=True, eq=False)
class AmplitudeSeries:
    """Real amplitude samples of one subcarrier.

    ``origin_index`` is the index of ``samples[0]`` in the source trace.
    """

    samples: np.ndarray
    sample_rate: float
    origin_index: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("amplitude series must be a nonempty 1-D array")
        if not self.sample_rate > 0:
            raise ValidationError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def slice(self, start: int, stop: int) -> "AmplitudeSeries":
        samples = self.samples[start:stop]
        return AmplitudeSeries(samples, self.sample_rate, self.origin_index + start)

    def with_samples(self, samples: np.ndarray) -> "AmplitudeSeries":
        return AmplitudeSeries(samples, self.sample_rate, self.origin_index)


@dataclass(frozen=True)
class BandSpec:
    low_hz: float
    high_hz: float
    order: int = 4

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise ValidationError(f"band needs 0 < low < high, got ({self.low_hz}, {self.high_hz})")
        if self.order < 1:
            raise ValidationError(f"filter order must be >= 1, got {self.order}")

    def check(self, sample_rate: float) -> None:
        if not self.high_hz < sample_rate / 2.0:
            raise ValidationError(
                f"band upper edge {self.high_hz} Hz is not below Nyquist ({sample_rate / 2.0} Hz)"
            )


BREATHING_BAND = BandSpec(0.25, 0.5)
HEART_BAND = BandSpec(1.0, 2.0)


@dataclass(frozen=True)
class RateEstimate:
    """Spectral rate estimate. ``bpm`` is None when the presence gate rejects the peak."""

    bpm: Optional[float]
    peak_freq_hz: float
    prominence_ratio: float

    @property
    def present(self) -> bool:
        return self.bpm is not None


@dataclass(frozen=True)
class WaveformMetrics:
    variance: float
    mean_amplitude_difference: float


def _check_stream(trace: "CsiTrace", stream: int) -> None:
    if trace.n_frames == 0:
        raise ValidationError("trace has no frames")
    if not 0 <= stream < trace.n_streams:
        raise ValidationError(f"stream {stream} out of range [0, {trace.n_streams})")


def amplitude_series(trace: "CsiTrace", stream: int, subcarrier: int) -> AmplitudeSeries:
    _check_stream(trace, stream)
    if not 0 <= subcarrier < trace.n_subcarriers:
        raise ValidationError(f"subcarrier {subcarrier} out of range [0, {trace.n_subcarriers})")
    samples = np.abs(trace.frames[:, stream, subcarrier]).astype(np.float64)
    return AmplitudeSeries(samples, trace.sample_rate, 0)


def subcarrier_variances(trace: "CsiTrace", stream: int) -> np.ndarray:
    """Sample variance of every subcarrier's amplitude on one stream."""
    _check_stream(trace, stream)
    return np.array(
        [
            np.var(np.abs(trace.frames[:, stream, k]).astype(np.float64))
            for k in range(trace.n_subcarriers)
        ]
    )


def select_subcarrier(trace: "CsiTrace", stream: int = 0) -> int:
    """Index of the subcarrier with the largest amplitude variance (lowest on ties)."""
    variances = subcarrier_variances(trace, stream)
    best = int(np.argmax(variances))
    logger.debug("Selected subcarrier %d (variance %.3e)", best, variances[best])
    return best


def hampel_filter(
    series: AmplitudeSeries, half_window: int = 3, n_sigma: float = 3.0
) -> AmplitudeSeries:
    """Replace samples deviating from their local median by more than n_sigma * 1.4826 * MAD.

    Windows hold up to ``half_window`` neighbours on each side plus the sample
    itself and are truncated at the series edges.
    """
    if half_window < 1:
        raise ValidationError(f"half_window must be >= 1, got {half_window}")
    x = series.samples
    n = x.size
    width = 2 * half_window + 1
    out = x.copy()

    if n >= width:
        windows = sliding_window_view(x, width)
        medians = np.median(windows, axis=1)
        mads = np.median(np.abs(windows - medians[:, None]), axis=1)
        centers = x[half_window : n - half_window]
        outliers = np.abs(centers - medians) > n_sigma * MAD_SCALE * mads
        out[half_window : n - half_window] = np.where(outliers, medians, centers)

    edges = list(range(min(half_window, n))) + list(range(max(half_window, n - half_window), n))
    for i in edges:
        window = x[max(0, i - half_window) : min(n, i + half_window + 1)]
        median = np.median(window)
        mad = np.median(np.abs(window - median))
        if abs(x[i] - median) > n_sigma * MAD_SCALE * mad:
            out[i] = median

    return series.with_samples(out)


def bandpass(series: AmplitudeSeries, band: BandSpec) -> AmplitudeSeries:
    """Zero-phase Butterworth bandpass (forward-backward second-order sections)."""
    band.check(series.sample_rate)
    n = len(series)
    if n <= 3 * band.order:
        raise ValidationError(f"series of {n} samples is too short for order {band.order}")

    sos = scipy.signal.butter(
        band.order,
        [band.low_hz, band.high_hz],
        btype="bandpass",
        fs=series.sample_rate,
        output="sos",
    )
    padlen = min(3 * (2 * sos.shape[0] + 1), n - 1)
    return series.with_samples(scipy.signal.sosfiltfilt(sos, series.samples, padlen=padlen))


def _interpolate_peak(spectrum: np.ndarray, peak: int) -> float:
    """Sub-bin offset of a spectral peak from a parabola through log magnitudes."""
    if peak <= 0 or peak >= spectrum.size - 1:
        return 0.0
    floor = np.finfo(np.float64).tiny
    a, b, c = np.log(np.maximum(spectrum[peak - 1 : peak + 2], floor))
    denominator = a - 2.0 * b + c
    if denominator >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denominator, -0.5, 0.5))


def estimate_rate_fft(
    series: AmplitudeSeries, band: BandSpec, gate_ratio: float = 5.0
) -> RateEstimate:
    """Dominant in-band rate from a Hann-windowed magnitude spectrum.

    prominence_ratio is the peak magnitude over the median in-band magnitude;
    the rate is reported only when it reaches ``gate_ratio``.
    """
    fs = series.sample_rate
    if series.duration_s < MIN_ESTIMATE_DURATION_S - 1e-9:
        raise ValidationError(
            f"rate estimation needs >= {MIN_ESTIMATE_DURATION_S:g} s, got {series.duration_s:.3f} s"
        )
    band.check(fs)

    n = len(series)
    x = series.samples - series.samples.mean()
    spectrum = np.abs(scipy.fft.rfft(x * scipy.signal.get_window("hann", n)))
    freqs = scipy.fft.rfftfreq(n, 1.0 / fs)

    in_band = np.flatnonzero((freqs >= band.low_hz) & (freqs <= band.high_hz))
    if in_band.size < MIN_BAND_BINS:
        raise ValidationError(
            f"band ({band.low_hz}, {band.high_hz}) Hz spans fewer than {MIN_BAND_BINS} FFT bins"
        )

    peak = int(in_band[np.argmax(spectrum[in_band])])
    peak_freq = (peak + _interpolate_peak(spectrum, peak)) * fs / n
    median = float(np.median(spectrum[in_band]))
    prominence = float(spectrum[peak]) / max(median, np.finfo(np.float64).tiny)

    bpm = 60.0 * peak_freq if prominence >= gate_ratio else None
    return RateEstimate(bpm=bpm, peak_freq_hz=peak_freq, prominence_ratio=prominence)


def waveform_metrics(series: AmplitudeSeries, period_s: float) -> WaveformMetrics:
    """Variance and mean peak-to-peak amplitude per period of a waveform."""
    period = int(round(period_s * series.sample_rate))
    if period < 1:
        raise ValidationError(f"period {period_s} s is shorter than one sample")
    n_periods = len(series) // period
    if n_periods == 0:
        raise ValidationError(f"series shorter than one {period_s} s period")

    blocks = series.samples[: n_periods * period].reshape(n_periods, period)
    swing = blocks.max(axis=1) - blocks.min(axis=1)
    return WaveformMetrics(
        variance=float(np.var(series.samples)), mean_amplitude_difference=float(swing.mean())
    )

