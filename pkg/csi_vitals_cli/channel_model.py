"""Ricean-K NLOS sensing model, Fresnel zone geometry and CSI trace synthesis.

The model splits the unit-normalised received signal into a static part
(LOS plus the static share ``rho`` of the NLOS power) and a dynamic part
reflected by the moving torso:

    |Hs| = (K + rho) / (K + 1)        |Hd| = (1 - rho) / (K + 1)

The motion-induced amplitude variation is ``f = 2 |Hs| |Hd| cos(theta)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .trace_io import CsiTrace, GroundTruth

logger = logging.getLogger(__name__)

# Saturated estimate returned when the sample variance underflows.
K_MAX = 1e6
MIN_K_SAMPLES = 1000

DEFAULT_WAVELENGTH = 0.057
SUBCARRIER_PHASE_STEP = math.pi / 30
STREAM_PHASE_STEP = math.pi / 7
WALK_CLAMP_WAVELENGTHS = 10.0

Point = Tuple[float, float]


@dataclass(frozen=True)
class RiceanChannelParams:
    """State of the NLOS sensing model.

    ``wavelength`` is the carrier wavelength (the model's lambda) in meters.
    The Doppler term and LOS angle of arrival are fixed to zero because the
    antennas do not move, so they are not stored.
    """

    k_factor: float = 52.0
    omega: float = 1.0
    rho: float = 0.7
    phi0: float = 0.0
    theta: float = math.pi / 3
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        for name in ("k_factor", "omega", "rho", "phi0", "theta", "wavelength"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"channel.{name} must be finite")
        if self.k_factor < 0:
            raise ValidationError(f"channel.k_factor must be >= 0, got {self.k_factor}")
        if self.omega <= 0:
            raise ValidationError(f"channel.omega must be > 0, got {self.omega}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"channel.rho must be in [0, 1], got {self.rho}")
        if self.wavelength <= 0:
            raise ValidationError(f"channel.lambda must be > 0, got {self.wavelength}")

    @property
    def hs_mag(self) -> float:
        return power_split(self)[0]

    @property
    def hd_mag(self) -> float:
        return power_split(self)[1]


@dataclass(frozen=True)
class ModelCurvePoint:
    k_factor: float
    rho: float
    theta: float
    f_value: float
    df_dk: float
    df_drho: float
    as_max: float


def power_split(params: RiceanChannelParams) -> Tuple[float, float]:
    """Return the normalised static and dynamic magnitudes (|Hs|, |Hd|)."""
    k, rho = params.k_factor, params.rho
    return (k + rho) / (k + 1.0), (1.0 - rho) / (k + 1.0)


def amplitude_squared(params: RiceanChannelParams) -> float:
    """Composite power |H|^2 = |Hs|^2 + |Hd|^2 + 2|Hs||Hd|cos(theta)."""
    hs, hd = power_split(params)
    return hs * hs + hd * hd + 2.0 * hs * hd * math.cos(params.theta)


def amplitude_fluctuation(params: RiceanChannelParams) -> float:
    """Motion-induced amplitude variation f(K, rho, theta)."""
    k, rho = params.k_factor, params.rho
    return 2.0 * (k + rho) * (1.0 - rho) * math.cos(params.theta) / (k + 1.0) ** 2


def d_fluctuation_dk(params: RiceanChannelParams) -> float:
    """Partial derivative of f in K.

    The cos(theta) factor is kept, so the sign statements (f decreasing for
    K > 1 - 2 rho) hold for cos(theta) > 0.
    """
    k, rho = params.k_factor, params.rho
    numerator = 2.0 * (1.0 - rho) * (-k * k - 2.0 * rho * k + 1.0 - 2.0 * rho)
    return numerator * math.cos(params.theta) / (k + 1.0) ** 4


def d_fluctuation_drho(params: RiceanChannelParams) -> float:
    """Partial derivative of f in rho; zero at rho = (1 - K) / 2."""
    k, rho = params.k_factor, params.rho
    return 2.0 * (1.0 - k - 2.0 * rho) * math.cos(params.theta) / (k + 1.0) ** 2


def k_stationary(rho: float) -> float:
    """K at which f'(K) vanishes for a given rho."""
    return 1.0 - 2.0 * rho


def rho_stationary(k_factor: float) -> float:
    """rho at which f'(rho) vanishes for a given K."""
    return (1.0 - k_factor) / 2.0


def sensing_ability(hs_mag: float, hd_mag: float) -> float:
    """Largest amplitude swing |Hf|max - |Hf|min as the dynamic vector rotates."""
    if hs_mag < 0 or hd_mag < 0:
        raise ValidationError("magnitudes must be >= 0")
    return 2.0 * min(hs_mag, hd_mag)


def model_sweep(rho: float, theta: float, k_grid: Sequence[float]) -> List[ModelCurvePoint]:
    """Evaluate the model and its derivatives along a K grid."""
    grid = np.asarray(k_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("k_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) < 0):
        raise ValidationError("k_grid must be sorted ascending")

    points = []
    for k in grid:
        params = RiceanChannelParams(k_factor=float(k), rho=rho, theta=theta)
        hs, hd = power_split(params)
        points.append(
            ModelCurvePoint(
                k_factor=float(k),
                rho=rho,
                theta=theta,
                f_value=amplitude_fluctuation(params),
                df_dk=d_fluctuation_dk(params),
                df_drho=d_fluctuation_drho(params),
                as_max=sensing_ability(hs, hd),
            )
        )
    return points


def block_los(
    params: RiceanChannelParams,
    k_blocked: float,
    dynamic_share: float,
    power_loss: float = 0.0,
) -> RiceanChannelParams:
    """Return the channel after partially blocking the LOS path.

    The LOS power removed by lowering K to ``k_blocked`` moves onto the NLOS
    paths; ``dynamic_share`` of it reaches the dynamic (body) path. With a
    share of zero |Hs| and |Hd| are unchanged, so f is unchanged.
    ``power_loss`` is the fraction of total received power lost to the block.
    """
    if not 0.0 <= k_blocked <= params.k_factor:
        raise ValidationError(
            f"k_blocked must be in [0, {params.k_factor}], got {k_blocked}"
        )
    if not 0.0 <= dynamic_share <= 1.0:
        raise ValidationError(f"dynamic_share must be in [0, 1], got {dynamic_share}")
    if not 0.0 <= power_loss < 1.0:
        raise ValidationError(f"power_loss must be in [0, 1), got {power_loss}")

    k = params.k_factor
    removed = k / (k + 1.0) - k_blocked / (k_blocked + 1.0)
    hd_new = params.hd_mag + dynamic_share * removed
    rho_new = min(1.0, max(0.0, 1.0 - hd_new * (k_blocked + 1.0)))
    return RiceanChannelParams(
        k_factor=k_blocked,
        omega=params.omega * (1.0 - power_loss),
        rho=rho_new,
        phi0=params.phi0,
        theta=params.theta,
        wavelength=params.wavelength,
    )


# Fresnel zones


@dataclass(frozen=True)
class FresnelGeometry:
    tx: Point
    rx: Point
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValidationError(f"lambda must be > 0, got {self.wavelength}")
        if tuple(self.tx) == tuple(self.rx):
            raise ValidationError("degenerate geometry: tx and rx coincide")

    @property
    def link_length(self) -> float:
        return math.hypot(self.rx[0] - self.tx[0], self.rx[1] - self.tx[1])


def fresnel_boundary_point(geom: FresnelGeometry, n: int, azimuth: float) -> Point:
    """Point on the boundary of the n-th Fresnel zone at the given azimuth.

    The azimuth is measured at the link midpoint from the Tx->Rx direction,
    so azimuth 0 is the ellipse vertex beyond Rx.
    """
    if n < 1:
        raise ValidationError(f"zone index must be >= 1, got {n}")

    c = geom.link_length / 2.0
    excess = n * geom.wavelength / 4.0
    a = c + excess
    b = math.sqrt(excess * (2.0 * c + excess))
    r = a * b / math.hypot(b * math.cos(azimuth), a * math.sin(azimuth))

    axis = math.atan2(geom.rx[1] - geom.tx[1], geom.rx[0] - geom.tx[0])
    cx = (geom.tx[0] + geom.rx[0]) / 2.0
    cy = (geom.tx[1] + geom.rx[1]) / 2.0
    return (cx + r * math.cos(axis + azimuth), cy + r * math.sin(axis + azimuth))


def fresnel_excess(geom: FresnelGeometry, point: Point) -> float:
    """Path-length excess |TxQ| + |QRx| - |TxRx| in meters."""
    d1 = math.hypot(point[0] - geom.tx[0], point[1] - geom.tx[1])
    d2 = math.hypot(point[0] - geom.rx[0], point[1] - geom.rx[1])
    return d1 + d2 - geom.link_length


def fresnel_zone_index(geom: FresnelGeometry, point: Point) -> int:
    """Index of the Fresnel zone containing ``point`` (1 for the first zone)."""
    return int(math.floor(fresnel_excess(geom, point) / (geom.wavelength / 2.0))) + 1


# Scenarios and synthesis


@dataclass(frozen=True)
class VitalMotion:
    freq: float = 0.0
    displacement_amp: float = 0.0


@dataclass(frozen=True)
class MotionEvent:
    start: float
    end: float
    displacement_walk_scale: float


@dataclass(frozen=True)
class SimScenario:
    duration: float = 60.0
    sample_rate: float = 1000.0
    channel: RiceanChannelParams = field(default_factory=RiceanChannelParams)
    breathing: VitalMotion = field(default_factory=lambda: VitalMotion(0.3, 0.002))
    heartbeat: VitalMotion = field(default_factory=lambda: VitalMotion(1.2, 0.0003))
    motion_events: Tuple[MotionEvent, ...] = ()
    noise_sigma: float = 5e-4
    n_subcarriers: int = 30
    n_streams: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "motion_events", tuple(self.motion_events))
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        if not self.sample_rate > 0:
            raise ValidationError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.n_subcarriers < 1 or self.n_streams < 1:
            raise ValidationError("n_subcarriers and n_streams must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

        for name in ("breathing", "heartbeat"):
            motion = getattr(self, name)
            if motion.displacement_amp < 0:
                raise ValidationError(f"{name}.displacement_amp must be >= 0")
            if motion.displacement_amp > 0 and not motion.freq > 0:
                raise ValidationError(f"{name}.freq must be > 0 when displacement_amp > 0")
            if self.sample_rate <= 2.0 * motion.freq:
                raise ValidationError(
                    f"sample_rate {self.sample_rate} Hz aliases {name}.freq {motion.freq} Hz"
                )

        for i, event in enumerate(self.motion_events):
            if not 0.0 <= event.start < event.end <= self.duration:
                raise ValidationError(
                    f"motion_events.{i} [{event.start}, {event.end}] must satisfy "
                    f"0 <= start < end <= duration ({self.duration})"
                )
            if event.displacement_walk_scale < 0:
                raise ValidationError(f"motion_events.{i}.displacement_walk_scale must be >= 0")

        order = sorted(range(len(self.motion_events)), key=lambda i: self.motion_events[i].start)
        for prev, cur in zip(order, order[1:]):
            a, b = self.motion_events[prev], self.motion_events[cur]
            if b.start < a.end:
                raise ValidationError(
                    f"motion_events.{prev} [{a.start}, {a.end}] overlaps "
                    f"motion_events.{cur} [{b.start}, {b.end}]"
                )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


def scenario_to_pairs(scenario: SimScenario) -> Dict[str, Any]:
    """Flatten a scenario into its key=value config paths."""
    pairs: Dict[str, Any] = {
        "duration": scenario.duration,
        "sample_rate": scenario.sample_rate,
    }
    channel = asdict(scenario.channel)
    channel["lambda"] = channel.pop("wavelength")
    for key, value in channel.items():
        pairs[f"channel.{key}"] = value
    for name in ("breathing", "heartbeat"):
        for key, value in asdict(getattr(scenario, name)).items():
            pairs[f"{name}.{key}"] = value
    for i, event in enumerate(scenario.motion_events):
        for key, value in asdict(event).items():
            pairs[f"motion_events.{i}.{key}"] = value
    pairs["noise_sigma"] = scenario.noise_sigma
    pairs["n_subcarriers"] = scenario.n_subcarriers
    pairs["n_streams"] = scenario.n_streams
    pairs["seed"] = scenario.seed
    return pairs


def _bounded_walk(steps: np.ndarray, limit: float) -> np.ndarray:
    walk = np.empty_like(steps)
    position = 0.0
    for i, step in enumerate(steps.tolist()):
        position = min(limit, max(-limit, position + step))
        walk[i] = position
    return walk


def synthesize_trace(scenario: SimScenario) -> Tuple[CsiTrace, GroundTruth]:
    """Synthesize a CSI trace and its ground truth from a scenario.

    H(t) = e^{j phi0} sqrt(Omega) (|Hs| + |Hd| e^{-j(2 pi d(t) / lambda - theta_sk)}) + n(t)

    where theta_sk adds a fixed per-subcarrier and per-stream offset to theta.
    Output is bitwise deterministic for a given scenario and seed.
    """
    fs = scenario.sample_rate
    n = scenario.n_samples
    channel = scenario.channel
    rng = np.random.default_rng(scenario.seed)

    t = np.arange(n, dtype=np.float64) / fs
    displacement = np.zeros(n, dtype=np.float64)
    for motion in (scenario.breathing, scenario.heartbeat):
        if motion.displacement_amp > 0:
            displacement += motion.displacement_amp * np.sin(2.0 * np.pi * motion.freq * t)

    limit = WALK_CLAMP_WAVELENGTHS * channel.wavelength
    for event in scenario.motion_events:
        i0 = min(n, int(round(event.start * fs)))
        i1 = min(n, int(round(event.end * fs)))
        if i1 <= i0:
            continue
        steps = rng.normal(0.0, event.displacement_walk_scale, i1 - i0)
        displacement[i0:i1] += _bounded_walk(steps, limit)

    hs, hd = power_split(channel)
    scale = math.sqrt(channel.omega)
    rotation = np.exp(1j * channel.phi0)
    path_phase = 2.0 * np.pi * displacement / channel.wavelength

    frames = np.empty((n, scenario.n_streams, scenario.n_subcarriers), dtype=np.complex64)
    for s in range(scenario.n_streams):
        for k in range(scenario.n_subcarriers):
            offset = channel.theta + k * SUBCARRIER_PHASE_STEP + s * STREAM_PHASE_STEP
            h = rotation * scale * (hs + hd * np.exp(-1j * (path_phase - offset)))
            if scenario.noise_sigma > 0:
                noise = rng.standard_normal((n, 2))
                h = h + scenario.noise_sigma * (noise[:, 0] + 1j * noise[:, 1])
            frames[:, s, k] = h

    trace = CsiTrace(sample_rate=fs, frames=frames, t0_ns=0)
    breathing, heartbeat = scenario.breathing, scenario.heartbeat
    events = sorted(scenario.motion_events, key=lambda e: e.start)
    truth = GroundTruth(
        breathing_freq_hz=breathing.freq if breathing.displacement_amp > 0 else None,
        heart_freq_hz=heartbeat.freq if heartbeat.displacement_amp > 0 else None,
        motion_events=[(e.start, e.end) for e in events],
        duration_s=n / fs,
        scenario=scenario_to_pairs(scenario),
    )
    logger.info(
        "Synthesized %d frames (%dx%d) at %.1f Hz, K=%.1f, rho=%.2f, %d events",
        n,
        scenario.n_streams,
        scenario.n_subcarriers,
        fs,
        channel.k_factor,
        channel.rho,
        len(scenario.motion_events),
    )
    return trace, truth


# K estimation


def ricean_samples(
    k_factor: float,
    n: int,
    omega: float = 1.0,
    phi0: float = 0.0,
    seed: Optional[int] = 0,
) -> np.ndarray:
    """Draw static-antenna Ricean samples with a known K factor."""
    if k_factor < 0 or omega <= 0 or n < 1:
        raise ValidationError("need k_factor >= 0, omega > 0 and n >= 1")
    rng = np.random.default_rng(seed)
    los = math.sqrt(k_factor * omega / (k_factor + 1.0)) * np.exp(1j * phi0)
    diffuse = rng.standard_normal((n, 2)) @ np.array([1.0, 1j]) / math.sqrt(2.0)
    return los + math.sqrt(omega / (k_factor + 1.0)) * diffuse


def estimate_k_factor(samples: np.ndarray) -> float:
    """Moment estimator K = |mean|^2 / mean(|x - mean|^2), saturating at K_MAX."""
    x = np.asarray(samples, dtype=np.complex128).ravel()
    if x.size < MIN_K_SAMPLES:
        raise ValidationError(f"need at least {MIN_K_SAMPLES} samples, got {x.size}")
    mean = x.mean()
    power = float(abs(mean) ** 2)
    variance = float(np.mean(np.abs(x - mean) ** 2))
    if variance == 0.0 or power >= K_MAX * variance:
        return K_MAX
    return power / variance


def estimate_ricean_k(trace: CsiTrace, stream: int = 0, subcarrier: int = 0) -> float:
    """Estimate the Ricean K factor of one stream/subcarrier of a trace."""
    if not 0 <= stream < trace.n_streams:
        raise ValidationError(f"stream {stream} out of range [0, {trace.n_streams})")
    if not 0 <= subcarrier < trace.n_subcarriers:
        raise ValidationError(f"subcarrier {subcarrier} out of range [0, {trace.n_subcarriers})")
    return estimate_k_factor(trace.frames[:, stream, subcarrier])
