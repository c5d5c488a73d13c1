"""Shared fixtures for the csi_vitals_cli test suite."""
import math
import os

import pytest

from csi_vitals_cli.channel_model import MotionEvent, RiceanChannelParams, SimScenario, VitalMotion
from csi_vitals_cli.config import reset_config

# Most scenarios run at 100 Hz: segmentation windows scale to 2 s and the
# suite stays fast.
TEST_RATE_HZ = 100.0


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch):
    """Start every test without CSI_VITALS_* variables or a cached Config."""
    for name in list(os.environ):
        if name.startswith("CSI_VITALS_"):
            monkeypatch.delenv(name, raising=False)
    reset_config()
    yield
    reset_config()


def build_scenario(
    duration=60.0,
    sample_rate=TEST_RATE_HZ,
    k_factor=12.4,
    rho=0.7,
    theta=math.pi / 3,
    breathing=(0.3, 0.002),
    heartbeat=(1.2, 0.0003),
    events=(),
    noise_sigma=5e-4,
    n_subcarriers=8,
    n_streams=1,
    seed=0,
):
    """SimScenario with test-friendly defaults; events are (start, end, walk_scale)."""
    return SimScenario(
        duration=duration,
        sample_rate=sample_rate,
        channel=RiceanChannelParams(k_factor=k_factor, rho=rho, theta=theta),
        breathing=VitalMotion(*breathing),
        heartbeat=VitalMotion(*heartbeat),
        motion_events=tuple(MotionEvent(*event) for event in events),
        noise_sigma=noise_sigma,
        n_subcarriers=n_subcarriers,
        n_streams=n_streams,
        seed=seed,
    )


@pytest.fixture
def make_scenario():
    return build_scenario


@pytest.fixture
def scenario_file(tmp_path):
    """Write scenario text to a file and return its path."""

    def write(text, name="scenario.env"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
