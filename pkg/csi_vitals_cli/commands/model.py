"""Channel model commands for CSI Vitals CLI."""
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from ..channel_model import estimate_ricean_k, model_sweep
from ..dsp import select_subcarrier
from ..errors import ValidationError
from ..output import handle_error, print_json, print_success, print_table
from ..trace_io import atomic_write, load_trace, write_model_csv


def model(
    rho: float = typer.Option(0.7, "--rho", help="Static share of NLOS power, in [0, 1]"),
    theta: float = typer.Option(0.0, "--theta", help="Static/dynamic phase difference (rad)"),
    k_min: float = typer.Option(0.0, "--k-min", help="Smallest K factor"),
    k_max: float = typer.Option(100.0, "--k-max", help="Largest K factor"),
    points: int = typer.Option(101, "--points", help="Number of K values"),
    out: str = typer.Option("-", "--out", "-o", help="CSV path, or - for stdout"),
):
    """
    Sweep the NLOS sensing model over K and emit plot-ready CSV.

    Columns: k,rho,theta,f,df_dk,df_drho,as_max

    Examples:
        csi-vitals model --rho 0.7 --theta 0 --k-min 0 --k-max 100 --points 101
        csi-vitals model --rho 0.3 --out sweep.csv
    """
    try:
        if points < 2:
            raise ValidationError(f"--points must be >= 2, got {points}")
        if not 0 <= k_min < k_max:
            raise ValidationError(f"need 0 <= --k-min < --k-max, got {k_min}, {k_max}")

        text = write_model_csv(model_sweep(rho, theta, np.linspace(k_min, k_max, points)))
        if out == "-":
            typer.echo(text, nl=False)
        else:
            atomic_write(Path(out), text)
            print_success(f"{points} points -> {out}")
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)


def estimate_k(
    input_path: Path = typer.Option(
        ..., "--in", "-i", exists=True, dir_okay=False, help="WITL trace or CSV capture"
    ),
    stream: Optional[int] = typer.Option(None, "--stream", help="Stream (default: all)"),
    subcarrier: Optional[int] = typer.Option(
        None, "--subcarrier", help="Subcarrier (default: largest amplitude variance)"
    ),
    table_format: bool = typer.Option(False, "--table", "-t", help="Display as table"),
):
    """
    Estimate the Ricean K factor of a trace.

    Examples:
        csi-vitals estimate-k --in trace.witl
        csi-vitals estimate-k --in trace.witl --stream 0 --subcarrier 12 --table
    """
    try:
        trace = load_trace(input_path)
        streams = range(trace.n_streams) if stream is None else [stream]

        estimates = []
        for s in streams:
            k = select_subcarrier(trace, s) if subcarrier is None else subcarrier
            estimates.append(
                {"stream": s, "subcarrier": k, "k_estimate": estimate_ricean_k(trace, s, k)}
            )

        if table_format:
            print_table(estimates, ["stream", "subcarrier", "k_estimate"])
        else:
            print_json(estimates)
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)
