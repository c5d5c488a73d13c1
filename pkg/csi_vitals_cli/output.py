"""Output formatting utilities for CSI Vitals CLI."""
import json
import logging
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.json import JSON
from rich.logging import RichHandler
from rich.table import Table

from .errors import InvariantError, VitalsError

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4
EXIT_INTERRUPTED = 130


def configure_logging(level: str = "WARNING"):
    """Route library logging to stderr through Rich."""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


def print_json(data: Any, indent: int = 2):
    """
    Print data as formatted JSON.

    Args:
        data: Data to print as JSON
        indent: Number of spaces for indentation
    """
    if isinstance(data, str):
        console.print_json(data, indent=indent)
    else:
        console.print(JSON(json.dumps(data, indent=indent, default=str), indent=indent))


def print_table(data: List[Dict[str, Any]], columns: List[str], title: Optional[str] = None):
    """
    Print data as a formatted table.

    Args:
        data: List of dictionaries to display
        columns: Column names to display
        title: Optional table title
    """
    if not data:
        console.print("[yellow]No data found[/yellow]")
        return

    table = Table(show_header=True, header_style="bold magenta", title=title)

    for col in columns:
        table.add_column(col)

    for row in data:
        table.add_row(*[format_value(row.get(col)) for col in columns])

    console.print(table)


def format_value(value: Any) -> str:
    """Render a table cell; absent values show as a dash."""
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def print_success(message: str):
    """Print a success message."""
    console.print(f"[green]✓[/green] {message}")


def print_error(message: str):
    """Print an error message."""
    err_console.print(f"[red]✗[/red] {message}")


def print_warning(message: str):
    """Print a warning message."""
    err_console.print(f"[yellow]⚠[/yellow] {message}")


def print_info(message: str):
    """Print an info message."""
    console.print(f"[blue]ℹ[/blue] {message}")


def handle_error(error: Exception) -> int:
    """
    Print an error and map it to the process exit code.

    Args:
        error: Exception to handle

    Returns:
        Exit code (2 validation/format, 3 I/O, 4 internal)
    """
    if isinstance(error, InvariantError):
        print_error(f"Internal invariant breached: {error}")
        return EXIT_INTERNAL
    elif isinstance(error, VitalsError):
        print_error(str(error))
        return EXIT_VALIDATION
    elif isinstance(error, OSError):
        print_error(f"I/O error: {error}")
        return EXIT_IO
    else:
        logging.getLogger(__name__).debug("Unexpected error", exc_info=error)
        print_error(f"Unexpected error: {error}")
        return EXIT_INTERNAL
