"""Trace synthesis command for CSI Vitals CLI."""
from pathlib import Path
from typing import List, Optional

import typer

from ..channel_model import synthesize_trace
from ..config import load_scenario
from ..output import handle_error, print_success
from ..trace_io import atomic_write, write_trace, write_truth


def default_truth_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}.truth.json")


def simulate(
    config: Path = typer.Option(
        ..., "--config", "-c", exists=True, dir_okay=False, help="Scenario file (key=value)"
    ),
    out: Path = typer.Option(..., "--out", "-o", dir_okay=False, help="Output WITL trace"),
    truth_out: Optional[Path] = typer.Option(
        None, "--truth-out", dir_okay=False, help="Ground-truth sidecar (default: <out>.truth.json)"
    ),
    overrides: List[str] = typer.Option(
        [], "--set", help="Override a scenario key, e.g. --set channel.rho=0.5 (repeatable)"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the scenario seed"),
):
    """
    Synthesize a CSI trace and its ground-truth sidecar from a scenario file.

    Examples:
        csi-vitals simulate --config scenario.env --out trace.witl
        csi-vitals simulate -c scenario.env -o trace.witl --set channel.k_factor=12.4 --seed 7
    """
    try:
        scenario = load_scenario(config, overrides, seed)
        trace, truth = synthesize_trace(scenario)
        truth_path = truth_out or default_truth_path(out)

        write_trace(out, trace)
        atomic_write(truth_path, write_truth(truth))

        events = ", ".join(f"[{a:g}, {b:g}]" for a, b in truth.motion_events) or "none"
        print_success(
            f"{trace.duration_s:g} s at {trace.sample_rate:g} Hz, "
            f"K={scenario.channel.k_factor:g}, rho={scenario.channel.rho:g}, "
            f"events {events} -> {out}"
        )
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)
