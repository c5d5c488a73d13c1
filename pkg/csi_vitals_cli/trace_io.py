"""Trace, ground-truth and report persistence.

Binary trace layout (all little-endian)::

    magic "WITL" | u8 version=1 | u8 flags=0 | u16 reserved=0 |
    u32 sample_rate_hz | u16 n_streams | u16 n_subcarriers |
    u64 n_frames | u64 t0_ns |
    n_frames * n_streams * n_subcarriers * (f32 re, f32 im)

Report JSON schema (every emit is validated against it)::

    {
      "windows": [{"start_s": float, "end_s": float,
                   "breathing": Rate | null, "heart": Rate | null}],
      "segments": [{"start": int, "end": int, "label": "Vital" | "OtherMotion"}],
      "selected_subcarrier": int,
      "sample_rate": float,
      "duration_s": float,
      "diagnostics": {"k_estimate": [float], "subcarrier_variance": [float]}
    }
    Rate = {"bpm": float, "peak_freq_hz": float, "prominence_ratio": float}
"""
from __future__ import annotations

import csv
import io
import logging
import os
import struct
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from .errors import (
    BadMagicError,
    SchemaError,
    ShapeOverflowError,
    TraceFormatError,
    TruncatedPayloadError,
    ValidationError,
    VersionMismatchError,
)

if TYPE_CHECKING:
    from .channel_model import ModelCurvePoint
    from .pipeline import VitalReport
    from .segmentation import MotionSegment

logger = logging.getLogger(__name__)

MAGIC = b"WITL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHIHHQQ")
HEADER_SIZE = _HEADER.size
_SAMPLE_DTYPE = np.dtype("<c8")

CSV_TRACE_HEADER = ["t_ns", "stream", "subcarrier", "re", "im"]
CSV_MODEL_HEADER = ["k", "rho", "theta", "f", "df_dk", "df_drho", "as_max"]
CSV_SEGMENT_HEADER = ["start_s", "end_s", "label"]


@dataclass(frozen=True, eq=False)
class CsiTrace:
    """Uniformly sampled CSI: ``frames[frame, stream, subcarrier]`` (complex64)."""

    sample_rate: float
    frames: np.ndarray
    t0_ns: int = 0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValidationError(f"sample_rate must be > 0, got {self.sample_rate}")
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise ValidationError(
                f"frames must have shape (frames, streams, subcarriers), got {frames.shape}"
            )
        object.__setattr__(self, "frames", np.ascontiguousarray(frames, dtype=np.complex64))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_streams(self) -> int:
        return self.frames.shape[1]

    @property
    def n_subcarriers(self) -> int:
        return self.frames.shape[2]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate

    @property
    def timestamps(self) -> np.ndarray:
        """Frame timestamps in nanoseconds."""
        offsets = np.round(np.arange(self.n_frames) * (1e9 / self.sample_rate))
        return self.t0_ns + offsets.astype(np.int64)

    def bitwise_equal(self, other: "CsiTrace") -> bool:
        return (
            self.sample_rate == other.sample_rate
            and self.t0_ns == other.t0_ns
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames.view(np.uint32), other.frames.view(np.uint32))
        )


@dataclass(frozen=True)
class GroundTruth:
    """Simulator sidecar: true rates, motion events and the scenario echo."""

    breathing_freq_hz: Optional[float]
    heart_freq_hz: Optional[float]
    motion_events: List[Tuple[float, float]]
    duration_s: float
    scenario: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for start, end in self.motion_events:
            if not 0.0 <= start < end <= self.duration_s + 1e-9:
                raise ValidationError(
                    f"motion event [{start}, {end}] outside trace duration {self.duration_s}"
                )


def atomic_write(path: Union[str, Path], data: Union[bytes, str]) -> None:
    """Write a file through a temporary sibling and an atomic rename."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


# Binary traces


def encode_trace(trace: CsiTrace) -> bytes:
    """Serialize a trace to WITL bytes."""
    rate = trace.sample_rate
    if rate != round(rate) or not 0 < rate < 2 ** 32:
        raise ValidationError(f"WITL stores integral sample rates below 2^32 Hz, got {rate}")
    if trace.n_streams > 0xFFFF or trace.n_subcarriers > 0xFFFF:
        raise ShapeOverflowError(
            f"shape {trace.n_streams}x{trace.n_subcarriers} exceeds the u16 header fields"
        )
    if not 0 <= trace.t0_ns < 2 ** 64:
        raise ValidationError(f"t0_ns must fit in u64, got {trace.t0_ns}")

    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        0,
        0,
        int(rate),
        trace.n_streams,
        trace.n_subcarriers,
        trace.n_frames,
        trace.t0_ns,
    )
    return header + trace.frames.astype(_SAMPLE_DTYPE, copy=False).tobytes()


def decode_trace(data: bytes) -> CsiTrace:
    """Parse WITL bytes into a trace."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header needs {HEADER_SIZE} bytes, got {len(data)}")

    _, version, _, _, rate, n_streams, n_subcarriers, n_frames, t0_ns = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {FORMAT_VERSION}")
    if rate == 0:
        raise TraceFormatError("sample_rate_hz is zero")
    if n_streams == 0 or n_subcarriers == 0:
        raise ShapeOverflowError(f"empty frame shape {n_streams}x{n_subcarriers}")

    n_values = n_frames * n_streams * n_subcarriers
    payload_size = n_values * _SAMPLE_DTYPE.itemsize
    if payload_size > sys.maxsize:
        raise ShapeOverflowError(f"{n_frames} frames of {n_streams}x{n_subcarriers} overflow")

    available = len(data) - HEADER_SIZE
    if available < payload_size:
        raise TruncatedPayloadError(f"payload needs {payload_size} bytes, got {available}")
    if available > payload_size:
        raise TraceFormatError(f"{available - payload_size} trailing bytes after payload")

    values = np.frombuffer(data, dtype=_SAMPLE_DTYPE, count=n_values, offset=HEADER_SIZE)
    frames = values.astype(np.complex64).reshape(n_frames, n_streams, n_subcarriers)
    return CsiTrace(sample_rate=float(rate), frames=frames, t0_ns=t0_ns)


def write_trace(path: Union[str, Path], trace: CsiTrace) -> None:
    atomic_write(path, encode_trace(trace))
    logger.debug("Wrote %d frames to %s", trace.n_frames, path)


def read_trace(path: Union[str, Path]) -> CsiTrace:
    trace = decode_trace(Path(path).read_bytes())
    logger.debug("Read %d frames from %s", trace.n_frames, path)
    return trace


def load_trace(path: Union[str, Path]) -> CsiTrace:
    """Read a WITL trace, or a CSV capture when the file ends in ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return import_csv(path.read_text(encoding="utf-8"))
    return read_trace(path)


# CSV interchange


def export_csv(trace: CsiTrace) -> str:
    """Render a trace as ``t_ns,stream,subcarrier,re,im`` CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_TRACE_HEADER)
    timestamps = trace.timestamps
    for i in range(trace.n_frames):
        t_ns = int(timestamps[i])
        for s in range(trace.n_streams):
            for k in range(trace.n_subcarriers):
                value = trace.frames[i, s, k]
                writer.writerow(
                    [t_ns, s, k, format(float(value.real), ".9g"), format(float(value.imag), ".9g")]
                )
    return buffer.getvalue()


def import_csv(text: str, sample_rate: Optional[float] = None) -> CsiTrace:
    """Parse CSV text produced by :func:`export_csv` (or a real capture)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_TRACE_HEADER:
        raise ValidationError(f"CSV header must be {','.join(CSV_TRACE_HEADER)}, got {header}")

    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            rows.append((int(row[0]), int(row[1]), int(row[2]), float(row[3]), float(row[4])))
        except (IndexError, ValueError) as e:
            raise ValidationError(f"CSV line {line_no}: {e}")
    if not rows:
        raise ValidationError("CSV contains no samples")
    if any(r[1] < 0 or r[2] < 0 for r in rows):
        raise ValidationError("CSV stream and subcarrier indices must be >= 0")

    times = np.unique(np.array([r[0] for r in rows], dtype=np.int64))
    n_streams = max(r[1] for r in rows) + 1
    n_subcarriers = max(r[2] for r in rows) + 1
    frames = np.zeros((times.size, n_streams, n_subcarriers), dtype=np.complex64)
    filled = np.zeros(frames.shape, dtype=bool)
    frame_index = {int(t): i for i, t in enumerate(times)}
    for t_ns, s, k, re, im in rows:
        i = frame_index[t_ns]
        frames[i, s, k] = np.complex64(complex(re, im))
        filled[i, s, k] = True
    if not filled.all():
        raise ValidationError("CSV does not cover every (frame, stream, subcarrier)")

    if sample_rate is None:
        if times.size < 2:
            raise ValidationError("sample_rate is required for single-frame CSV traces")
        spacing = (times[-1] - times[0]) / (times.size - 1)
        sample_rate = 1e9 / spacing
        if abs(sample_rate - round(sample_rate)) < 1e-6 * sample_rate:
            sample_rate = float(round(sample_rate))

    trace = CsiTrace(sample_rate=sample_rate, frames=frames, t0_ns=int(times[0]))
    if np.any(np.abs(trace.timestamps - times) > 1):
        raise ValidationError("CSV timestamps are not uniformly spaced")
    return trace


def write_model_csv(points: Iterable["ModelCurvePoint"]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_MODEL_HEADER)
    for p in points:
        writer.writerow(
            [repr(v) for v in (p.k_factor, p.rho, p.theta, p.f_value, p.df_dk, p.df_drho, p.as_max)]
        )
    return buffer.getvalue()


def write_segments_csv(segments: Iterable["MotionSegment"], sample_rate: float) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_SEGMENT_HEADER)
    for seg in segments:
        writer.writerow(
            [f"{seg.start / sample_rate:.6f}", f"{seg.end / sample_rate:.6f}", seg.label.value]
        )
    return buffer.getvalue()


# JSON documents


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _RateDocument(_Document):
    bpm: float = Field(ge=0)
    peak_freq_hz: float = Field(ge=0)
    prominence_ratio: float = Field(ge=0)


class _WindowDocument(_Document):
    start_s: float = Field(ge=0)
    end_s: float = Field(ge=0)
    breathing: Optional[_RateDocument]
    heart: Optional[_RateDocument]


class _SegmentDocument(_Document):
    start: int = Field(ge=0)
    end: int = Field(ge=0)
    label: Literal["Vital", "OtherMotion"]


class _DiagnosticsDocument(_Document):
    k_estimate: List[float]
    subcarrier_variance: List[float]


class _ReportDocument(_Document):
    windows: List[_WindowDocument]
    segments: List[_SegmentDocument]
    selected_subcarrier: int = Field(ge=0)
    sample_rate: float = Field(gt=0)
    duration_s: float = Field(ge=0)
    diagnostics: _DiagnosticsDocument


class _TruthDocument(_Document):
    breathing_freq_hz: Optional[float]
    heart_freq_hz: Optional[float]
    motion_events: List[Tuple[float, float]]
    duration_s: float = Field(ge=0)
    scenario: Dict[str, Union[int, float, str]]


def _schema_error(error: PydanticValidationError) -> SchemaError:
    first = error.errors()[0]
    path = ".".join(str(part) for part in first["loc"])
    return SchemaError(first["msg"], path=path or "<root>")


def _validate(model: type, payload: Any, from_json: bool = False) -> Any:
    try:
        if from_json:
            return model.model_validate_json(payload)
        return model.model_validate(payload)
    except PydanticValidationError as e:
        raise _schema_error(e)


def _rate_payload(rate) -> Optional[Dict[str, float]]:
    if rate is None or rate.bpm is None:
        return None
    return {
        "bpm": rate.bpm,
        "peak_freq_hz": rate.peak_freq_hz,
        "prominence_ratio": rate.prominence_ratio,
    }


def write_report(report: "VitalReport") -> str:
    """Serialize a report to JSON text, validating it against the schema."""
    payload = {
        "windows": [
            {
                "start_s": w.start_s,
                "end_s": w.end_s,
                "breathing": _rate_payload(w.breathing),
                "heart": _rate_payload(w.heart),
            }
            for w in report.windows
        ],
        "segments": [
            {"start": s.start, "end": s.end, "label": s.label.value} for s in report.segments
        ],
        "selected_subcarrier": report.selected_subcarrier,
        "sample_rate": report.sample_rate,
        "duration_s": report.duration_s,
        "diagnostics": {
            "k_estimate": list(report.diagnostics.k_estimate),
            "subcarrier_variance": list(report.diagnostics.subcarrier_variance),
        },
    }
    document = _validate(_ReportDocument, payload)
    return document.model_dump_json(indent=2) + "\n"


def read_report(text: str) -> "VitalReport":
    """Parse and validate report JSON text."""
    from .dsp import RateEstimate
    from .pipeline import Diagnostics, VitalReport, VitalWindow
    from .segmentation import MotionSegment, SegmentLabel

    document = _validate(_ReportDocument, text, from_json=True)

    def rate(doc: Optional[_RateDocument]) -> Optional[RateEstimate]:
        if doc is None:
            return None
        return RateEstimate(doc.bpm, doc.peak_freq_hz, doc.prominence_ratio)

    return VitalReport(
        windows=tuple(
            VitalWindow(w.start_s, w.end_s, rate(w.breathing), rate(w.heart))
            for w in document.windows
        ),
        segments=tuple(
            MotionSegment(s.start, s.end, SegmentLabel(s.label)) for s in document.segments
        ),
        selected_subcarrier=document.selected_subcarrier,
        sample_rate=document.sample_rate,
        duration_s=document.duration_s,
        diagnostics=Diagnostics(
            k_estimate=tuple(document.diagnostics.k_estimate),
            subcarrier_variance=tuple(document.diagnostics.subcarrier_variance),
        ),
    )


def write_truth(truth: GroundTruth) -> str:
    """Serialize a ground-truth sidecar to JSON text."""
    payload = {
        "breathing_freq_hz": truth.breathing_freq_hz,
        "heart_freq_hz": truth.heart_freq_hz,
        "motion_events": [list(event) for event in truth.motion_events],
        "duration_s": truth.duration_s,
        "scenario": truth.scenario,
    }
    return _validate(_TruthDocument, payload).model_dump_json(indent=2) + "\n"


def read_truth(text: str) -> GroundTruth:
    document = _validate(_TruthDocument, text, from_json=True)
    return GroundTruth(
        breathing_freq_hz=document.breathing_freq_hz,
        heart_freq_hz=document.heart_freq_hz,
        motion_events=[tuple(event) for event in document.motion_events],
        duration_s=document.duration_s,
        scenario=dict(document.scenario),
    )
