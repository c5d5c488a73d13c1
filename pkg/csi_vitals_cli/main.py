"""Main entry point for CSI Vitals CLI."""
import sys
from typing import Optional

import typer

from .commands import analyze, model, simulate
from .config import get_config
from .output import EXIT_INTERRUPTED, configure_logging, handle_error

# Create main Typer app
app = typer.Typer(
    name="csi-vitals",
    help="Breathing and heart rate sensing from Wi-Fi CSI amplitude - simulate, segment, analyze",
    no_args_is_help=True,
    add_completion=True,
)

app.command("simulate")(simulate.simulate)
app.command("analyze")(analyze.analyze)
app.command("segment")(analyze.segment)
app.command("evaluate")(analyze.evaluate)
app.command("model")(model.model)
app.command("estimate-k")(model.estimate_k)


@app.callback()
def callback(
    ctx: typer.Context,
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-V",
        help="Show version and exit",
        is_eager=True,
    ),
    verbose: bool = typer.Option(False, "--verbose", help="Enable debug logging"),
):
    """
    CSI Vitals - Vital-sign sensing from Wi-Fi channel state information.

    Defaults are read from environment variables (or a .env file):
      - CSI_VITALS_LOG_LEVEL (WARNING)
      - CSI_VITALS_WINDOW_S (30), CSI_VITALS_STEP_S (5)
      - CSI_VITALS_GATE_RATIO (5.0)
      - CSI_VITALS_MED_STRIDE (1), CSI_VITALS_ACTIVATION_FACTOR (2.5)

    Examples:
        csi-vitals simulate --config scenario.env --out trace.witl
        csi-vitals analyze --in trace.witl --report report.json
        csi-vitals segment --in trace.witl --out-csv segments.csv
        csi-vitals model --rho 0.7 --theta 0 --out sweep.csv
        csi-vitals estimate-k --in trace.witl
    """
    if version:
        from . import __version__
        typer.echo(f"csi-vitals-cli version {__version__}")
        raise typer.Exit()

    try:
        level = "DEBUG" if verbose else get_config().log_level
    except Exception as e:
        raise typer.Exit(handle_error(e))
    configure_logging(level)


def main():
    """Main entry point for the CLI application."""
    try:
        app()
    except KeyboardInterrupt:
        typer.echo("\nAborted!", err=True)
        sys.exit(EXIT_INTERRUPTED)
    except Exception as e:
        sys.exit(handle_error(e))


if __name__ == "__main__":
    main()
