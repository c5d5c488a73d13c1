"""Configuration management for CSI Vitals CLI.

Runtime defaults come from environment variables (or a ``.env`` file).
Simulation scenarios come from key=value files tokenised with the same
dotenv parser, so quoting, ``#`` comments and ``export`` prefixes behave
like a ``.env`` file.
"""
import io
import logging
import math
import os
import re
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

from dotenv import load_dotenv
from dotenv.parser import parse_stream

from .channel_model import MotionEvent, RiceanChannelParams, SimScenario, VitalMotion
from .errors import ScenarioConfigError, ValidationError
from .pipeline import PipelineConfig
from .segmentation import SegmentationConfig

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _env_number(name: str, default: float, cast: Callable[[str], float] = float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        raise ValidationError(f"{name} must be a number, got {raw!r}")


class Config:
    """Runtime defaults for analysis commands."""

    def __init__(self):
        """Initialize configuration from environment variables."""
        load_dotenv()

        self.log_level = os.getenv("CSI_VITALS_LOG_LEVEL", "WARNING").strip().upper()
        if self.log_level not in LOG_LEVELS:
            raise ValidationError(
                f"CSI_VITALS_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, "
                f"got {self.log_level!r}"
            )

        # Pipeline windowing
        self.window_s = _env_number("CSI_VITALS_WINDOW_S", 30.0)
        self.step_s = _env_number("CSI_VITALS_STEP_S", 5.0)
        self.gate_ratio = _env_number("CSI_VITALS_GATE_RATIO", 5.0)

        # Segmentation
        self.med_stride = int(_env_number("CSI_VITALS_MED_STRIDE", 1, int))
        self.activation_factor = _env_number("CSI_VITALS_ACTIVATION_FACTOR", 2.5)

    def segmentation_config(self, activation_factor: Optional[float] = None) -> SegmentationConfig:
        """Segmentation settings at the 1000 Hz reference packet rate."""
        if activation_factor is None:
            activation_factor = self.activation_factor
        return SegmentationConfig(
            activation_factor=activation_factor,
            med_stride=self.med_stride,
        )

    def pipeline_config(
        self,
        window_s: Optional[float] = None,
        step_s: Optional[float] = None,
        gate_ratio: Optional[float] = None,
    ) -> PipelineConfig:
        """Pipeline settings, with explicit arguments taking precedence over the environment."""
        return PipelineConfig(
            window_s=self.window_s if window_s is None else window_s,
            step_s=self.step_s if step_s is None else step_s,
            gate_ratio=self.gate_ratio if gate_ratio is None else gate_ratio,
            segmentation=self.segmentation_config(),
        )


# Global config instance
_config: Optional[Config] = None


def get_config() -> Config:
    """
    Get or create the global configuration instance.

    Returns:
        Config: Global configuration object
    """
    global _config
    if _config is None:
        _config = Config()
    return _config


def reset_config():
    """Reset the global configuration instance (useful for testing)."""
    global _config
    _config = None


# Scenario files

_SCALAR_KEYS: Dict[str, Callable[[str], Union[int, float]]] = {
    "duration": float,
    "sample_rate": float,
    "noise_sigma": float,
    "n_subcarriers": int,
    "n_streams": int,
    "seed": int,
}
# Config key -> RiceanChannelParams field
_CHANNEL_KEYS = {
    "k_factor": "k_factor",
    "omega": "omega",
    "rho": "rho",
    "phi0": "phi0",
    "theta": "theta",
    "lambda": "wavelength",
}
_MOTION_KEYS = ("freq", "displacement_amp")
_EVENT_FIELDS = ("start", "end", "displacement_walk_scale")
_EVENT_KEY = re.compile(r"^motion_events\.(\d+)\.(start|end|displacement_walk_scale)$")

# key -> (value, line); line is None for command-line overrides
Entries = Dict[str, Tuple[Union[int, float], Optional[int]]]


def _is_known(key: str) -> bool:
    if key in _SCALAR_KEYS or _EVENT_KEY.match(key):
        return True
    group, _, name = key.partition(".")
    if group == "channel":
        return name in _CHANNEL_KEYS
    if group in ("breathing", "heartbeat"):
        return name in _MOTION_KEYS
    return False


def _convert(key: str, raw: str, line: Optional[int]) -> Union[int, float]:
    cast = _SCALAR_KEYS.get(key, float)
    try:
        value = cast(raw.strip())
    except ValueError:
        kind = "an integer" if cast is int else "a number"
        raise ScenarioConfigError(f"{key} must be {kind}, got {raw!r}", line)
    if isinstance(value, float) and not math.isfinite(value):
        raise ScenarioConfigError(f"{key} must be finite, got {raw!r}", line)
    return value


def _add_entry(entries: Entries, key: str, raw: Optional[str], line: Optional[int]) -> None:
    if not _is_known(key):
        raise ScenarioConfigError(f"unknown key {key!r}", line)
    if raw is None:
        raise ScenarioConfigError(f"{key} has no value", line)
    entries[key] = (_convert(key, raw, line), line)


def parse_scenario_entries(text: str) -> Entries:
    """Tokenise scenario text into typed entries, keeping line numbers."""
    entries: Entries = {}
    for binding in parse_stream(io.StringIO(text)):
        # Bindings start at the blank lines that precede them.
        raw = binding.original.string
        line = binding.original.line + raw[: len(raw) - len(raw.lstrip())].count("\n")
        if binding.error:
            raise ScenarioConfigError(
                f"cannot parse {binding.original.string.strip()!r}", line
            )
        if binding.key is None:
            continue
        if binding.key in entries:
            raise ScenarioConfigError(f"duplicate key {binding.key!r}", line)
        _add_entry(entries, binding.key, binding.value, line)
    return entries


def apply_overrides(entries: Entries, overrides: Iterable[str]) -> Entries:
    """Apply ``key=value`` overrides (as given to ``--set``) on top of file entries."""
    merged = dict(entries)
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep:
            raise ValidationError(f"override {override!r} must look like key=value")
        _add_entry(merged, key.strip(), raw, None)
    return merged


def _line_of(entries: Entries, message: str) -> Optional[int]:
    """Line of the first key (or event prefix) the message names."""
    for key, (_, line) in sorted(entries.items(), key=lambda kv: kv[1][1] or 0):
        if line is None:
            continue
        event = _EVENT_KEY.match(key)
        name = f"motion_events.{event.group(1)}" if event else key
        if message.startswith(name):
            return line
    return None


def build_scenario(entries: Entries) -> SimScenario:
    """Build and validate a scenario from typed entries."""
    values = {key: value for key, (value, _) in entries.items()}

    events: Dict[int, Dict[str, float]] = {}
    for key, value in values.items():
        match = _EVENT_KEY.match(key)
        if match:
            events.setdefault(int(match.group(1)), {})[match.group(2)] = float(value)
    if sorted(events) != list(range(len(events))):
        raise ScenarioConfigError(
            f"motion_events indices must run 0..{len(events) - 1}, got {sorted(events)}"
        )
    for index, fields in sorted(events.items()):
        missing = [f for f in _EVENT_FIELDS if f not in fields]
        if missing:
            prefix = f"motion_events.{index}."
            lines = [line for key, (_, line) in entries.items() if key.startswith(prefix)]
            first_line = min((line for line in lines if line is not None), default=None)
            raise ScenarioConfigError(
                f"motion_events.{index} is missing {', '.join(missing)}", first_line
            )

    try:
        channel_args = {
            field: float(values[f"channel.{key}"])
            for key, field in _CHANNEL_KEYS.items()
            if f"channel.{key}" in values
        }
        scenario_args = {key: values[key] for key in _SCALAR_KEYS if key in values}
        for name in ("breathing", "heartbeat"):
            motion_args = {
                key: float(values[f"{name}.{key}"])
                for key in _MOTION_KEYS
                if f"{name}.{key}" in values
            }
            if motion_args:
                defaults = getattr(SimScenario(), name)
                scenario_args[name] = VitalMotion(
                    freq=motion_args.get("freq", defaults.freq),
                    displacement_amp=motion_args.get("displacement_amp", defaults.displacement_amp),
                )
        return SimScenario(
            channel=RiceanChannelParams(**channel_args),
            motion_events=tuple(MotionEvent(**events[index]) for index in range(len(events))),
            **scenario_args,
        )
    except ScenarioConfigError:
        raise
    except ValidationError as e:
        raise ScenarioConfigError(str(e), _line_of(entries, str(e)))


def load_scenario(
    path: Union[str, Path], overrides: Iterable[str] = (), seed: Optional[int] = None
) -> SimScenario:
    """Read a scenario file, apply ``--set`` overrides and an optional seed."""
    text = Path(path).read_text(encoding="utf-8")
    entries = apply_overrides(parse_scenario_entries(text), overrides)
    if seed is not None:
        entries["seed"] = (seed, None)
    scenario = build_scenario(entries)
    logger.debug("Loaded scenario from %s: %s", path, scenario)
    return scenario
