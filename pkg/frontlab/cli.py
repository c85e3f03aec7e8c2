"""frontlab CLI: entry point for the front-tracking experiments."""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from frontlab import __app_name__, __version__
from frontlab.config import RunConfig, load_config
from frontlab.core.pipeline import (
    CommandResult,
    run_calibrate,
    run_evolve,
    run_holder,
    run_riemann,
    run_validate,
    worker_map,
)
from frontlab.errors import EXIT_INVARIANT, FrontlabError
from frontlab.utils import RunWriter, config_hash, configure_logging

# ---------------------------------------------------------------------------
# App & Console
# ---------------------------------------------------------------------------

app = typer.Typer(
    name=__app_name__,
    help="frontlab: front-tracking laboratory for the 1-D full Euler system.",
    add_completion=False,
    rich_markup_mode="rich",
)

console = Console()

Runner = Callable[..., CommandResult]

# ---------------------------------------------------------------------------
# Shared options
# ---------------------------------------------------------------------------

_CONFIG = typer.Option(None, "--config", "-c", help="TOML run configuration (defaults when omitted).")
_SEED = typer.Option(None, "--seed", help="Override the configured seed.")
_OUT = typer.Option(Path("frontlab-out"), "--out", "-o", help="Run directory receiving CSV/JSON artifacts.")
_JOBS = typer.Option(1, "--jobs", "-j", help="Worker processes for independent ladder cells.")
_JSON = typer.Option(False, "--json", help="Print the result summary as JSON instead of Rich tables.")
_VERBOSE = typer.Option(False, "--verbose", help="Enable debug logging.")

# ---------------------------------------------------------------------------
# Version callback
# ---------------------------------------------------------------------------


def _version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"[bold cyan]{__app_name__}[/bold cyan] v{__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: Optional[bool] = typer.Option(  # noqa: UP007
        None,
        "--version",
        "-V",
        help="Show the application version and exit.",
        callback=_version_callback,
        is_eager=True,
    ),
) -> None:
    """frontlab: Riemann fans, front tracking, weighted functionals and stability experiments."""


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _load(config_path: Optional[Path], seed: Optional[int]) -> RunConfig:  # noqa: UP007
    config = load_config(config_path)
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config


def _execute(
    runner: Runner,
    config_path: Optional[Path],  # noqa: UP007
    seed: Optional[int],  # noqa: UP007
    out: Path,
    jobs: int,
    output_json: bool,
    verbose: bool,
) -> None:
    """Run one subcommand and map its outcome onto the process exit code."""
    configure_logging(verbose)
    try:
        config = _load(config_path, seed)
        writer = RunWriter(out, config_hash(config.canonical()))
        with worker_map(jobs) as mapper:
            result = runner(config, writer, mapper)
    except FrontlabError as exc:
        _print_error(exc, output_json)
        raise typer.Exit(code=exc.exit_code) from exc

    if output_json:
        _print_json(result)
    else:
        _print_rich(result, out)
    if not result.passed:
        raise typer.Exit(code=EXIT_INVARIANT)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@app.command()
def riemann(
    config: Optional[Path] = _CONFIG,  # noqa: UP007
    seed: Optional[int] = _SEED,  # noqa: UP007
    out: Path = _OUT,
    jobs: int = _JOBS,
    output_json: bool = _JSON,
    verbose: bool = _VERBOSE,
) -> None:
    """Solve the configured Riemann problem and dump the fan and wave curves."""
    _execute(run_riemann, config, seed, out, jobs, output_json, verbose)


@app.command()
def evolve(
    config: Optional[Path] = _CONFIG,  # noqa: UP007
    seed: Optional[int] = _SEED,  # noqa: UP007
    out: Path = _OUT,
    jobs: int = _JOBS,
    output_json: bool = _JSON,
    verbose: bool = _VERBOSE,
) -> None:
    """Run front tracking (optionally shifted) and write the trajectory."""
    _execute(run_evolve, config, seed, out, jobs, output_json, verbose)


@app.command()
def validate(
    config: Optional[Path] = _CONFIG,  # noqa: UP007
    seed: Optional[int] = _SEED,  # noqa: UP007
    out: Path = _OUT,
    jobs: int = _JOBS,
    output_json: bool = _JSON,
    verbose: bool = _VERBOSE,
) -> None:
    """Run the invariant suite; exits with 1 on any failure."""
    _execute(run_validate, config, seed, out, jobs, output_json, verbose)


@app.command()
def holder(
    config: Optional[Path] = _CONFIG,  # noqa: UP007
    seed: Optional[int] = _SEED,  # noqa: UP007
    out: Path = _OUT,
    jobs: int = _JOBS,
    output_json: bool = _JSON,
    verbose: bool = _VERBOSE,
) -> None:
    """Run the stability experiment over the perturbation ladder."""
    _execute(run_holder, config, seed, out, jobs, output_json, verbose)


@app.command()
def calibrate(
    config: Optional[Path] = _CONFIG,  # noqa: UP007
    seed: Optional[int] = _SEED,  # noqa: UP007
    out: Path = _OUT,
    jobs: int = _JOBS,
    output_json: bool = _JSON,
    verbose: bool = _VERBOSE,
) -> None:
    """Calibrate the scheme's constants and write the constants ledger."""
    _execute(run_calibrate, config, seed, out, jobs, output_json, verbose)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _print_json(result: CommandResult) -> None:
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))


def _print_error(exc: FrontlabError, output_json: bool) -> None:
    if output_json:
        print(json.dumps({"passed": False, **exc.to_dict()}, indent=2, sort_keys=True))
        return
    console.print(f"[bold red]✗[/bold red] {type(exc).__name__}: {exc}")


def _format(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _print_rich(result: CommandResult, out: Path) -> None:
    """Render a result summary as a Rich table and a status panel."""
    table = Table(title=f"frontlab {result.name}", header_style="bold magenta")
    table.add_column("Item", style="cyan")
    table.add_column("Value", justify="right")
    for key, value in result.summary.items():
        text = _format(value)
        if text == "FAIL":
            text = "[bold red]FAIL[/bold red]"
        table.add_row(key, text)
    console.print(table)

    status = "[bold green]✔ passed[/bold green]" if result.passed else "[bold red]✗ failed[/bold red]"
    console.print(
        Panel(
            f"{status}\n[dim]{len(result.files)} file(s) in[/dim] {out}",
            title=result.name,
            border_style="green" if result.passed else "red",
        )
    )
