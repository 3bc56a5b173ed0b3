import logging
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import typer
from pydantic import ValidationError

from ris_mismatch import logging as log_setup
from ris_mismatch.config import ExperimentConfig, get_settings, load_experiment_config, validation_message
from ris_mismatch.core.experiments import (
    BETA_COLUMNS,
    PSEUDO_TRUE_COLUMNS,
    SIZE_COLUMNS,
    SNR_COLUMNS,
    SNR_TRIAL_COLUMNS,
    run_pseudo_true,
    run_sweep_beta,
    run_sweep_size,
    run_sweep_snr,
    run_verify,
)
from ris_mismatch.exceptions import ConfigError, MismatchToolkitError
from ris_mismatch.utils.cli_utils import get_rich_console, verify_table
from ris_mismatch.utils.io import write_table

app = typer.Typer(help="Misspecified-model bounds and MML estimation for RIS near-field localization.")
logger = logging.getLogger(__name__)
console = get_rich_console()

EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2

ConfigOption = typer.Option(None, "--config", "-c", help="TOML experiment file (default: packaged defaults).")
OutOption = typer.Option(None, "--out", help="Output directory.")
SeedOption = typer.Option(None, "--seed", min=0, max=2**64 - 1, help="Master seed (u64).")
ProfilesOption = typer.Option(None, "--profiles", min=1, help="Number of random phase profiles.")
TrialsOption = typer.Option(None, "--trials", min=1, help="Monte Carlo trials per SNR point.")
FullScaleOption = typer.Option(None, "--full-scale/--desk-scale", help="Use full-scale profile/trial counts.")
WorkersOption = typer.Option(None, "--workers", min=1, help="Worker processes (default: RIS_MISMATCH_WORKERS).")


def _config_error(message: object) -> typer.Exit:
    console.print(f"[bold red]✖[/bold red] Config error: {message}")
    return typer.Exit(code=EXIT_CONFIG_ERROR)


@app.callback()
def main(log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides RIS_MISMATCH_LOG_LEVEL.")):
    try:
        log_setup.configure(log_level)
    except ValidationError as e:
        raise _config_error(f"environment: {validation_message(e)}")


def _load(
    config: Optional[Path],
    seed: Optional[int] = None,
    profiles: Optional[int] = None,
    trials: Optional[int] = None,
    out: Optional[Path] = None,
    full_scale: Optional[bool] = None,
    workers: Optional[int] = None,
) -> ExperimentConfig:
    try:
        if config is None:
            with resources.as_file(resources.files("ris_mismatch") / "default_experiment.toml") as path:
                cfg = load_experiment_config(path)
        else:
            cfg = load_experiment_config(config)
        # приоритет: флаг CLI > файл > окружение
        if workers is None and "workers" not in cfg.run.model_fields_set:
            workers = get_settings().workers
        return cfg.with_overrides(
            seed=seed, profiles=profiles, trials=trials, out=out, full_scale=full_scale, workers=workers
        )
    except ConfigError as e:
        raise _config_error(e)
    except ValidationError as e:
        raise _config_error(validation_message(e))


def _run(title: str, func: Callable[[], object]):
    console.rule(f"[bold cyan]{title}[/bold cyan]")
    try:
        with console.status(f"Running {title}...", spinner="dots"):
            return func()
    except ValidationError as e:
        logger.exception(f"{title} rejected a derived value")
        raise _config_error(validation_message(e))
    except MismatchToolkitError as e:
        logger.exception(f"{title} failed")
        console.print(f"[bold red]✖[/bold red] {title} FAILED: {e}")
        raise typer.Exit(code=1)


def _write(cfg: ExperimentConfig, rows: list[dict], columns: list[str], stem: str) -> None:
    for path in write_table(rows, columns, cfg.output.directory, stem, cfg.output.formats):
        console.print(f"[bold green]✔[/bold green] {len(rows)} rows → {path}")


@app.command("sweep-beta")
def sweep_beta(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    profiles: Optional[int] = ProfilesOption,
    full_scale: Optional[bool] = FullScaleOption,
    workers: Optional[int] = WorkersOption,
):
    """LB, MCRB, bias and perfect-knowledge CRB versus beta_min for each SNR."""
    cfg = _load(config, seed=seed, profiles=profiles, out=out, full_scale=full_scale, workers=workers)
    rows = _run("sweep-beta", lambda: run_sweep_beta(cfg))
    _write(cfg, rows, BETA_COLUMNS, "sweep_beta")


@app.command("sweep-size")
def sweep_size(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    profiles: Optional[int] = ProfilesOption,
    full_scale: Optional[bool] = FullScaleOption,
    workers: Optional[int] = WorkersOption,
):
    """Profile-averaged LB and CRB versus RIS size (square arrays)."""
    cfg = _load(config, seed=seed, profiles=profiles, out=out, full_scale=full_scale, workers=workers)
    rows = _run("sweep-size", lambda: run_sweep_size(cfg))
    _write(cfg, rows, SIZE_COLUMNS, "sweep_size")


@app.command("sweep-snr")
def sweep_snr(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    trials: Optional[int] = TrialsOption,
    full_scale: Optional[bool] = FullScaleOption,
    workers: Optional[int] = WorkersOption,
):
    """MML RMSE with LB, MCRB and bias versus SNR (profile 0)."""
    cfg = _load(config, seed=seed, trials=trials, out=out, full_scale=full_scale, workers=workers)
    rows, trial_rows = _run("sweep-snr", lambda: run_sweep_snr(cfg))
    _write(cfg, rows, SNR_COLUMNS, "sweep_snr")
    _write(cfg, trial_rows, SNR_TRIAL_COLUMNS, "sweep_snr_trials")


@app.command("pseudo-true")
def pseudo_true(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Pseudo-true parameter and full bound record per (distance, beta_min, SNR)."""
    cfg = _load(config, seed=seed, out=out)
    rows = _run("pseudo-true", lambda: run_pseudo_true(cfg))
    _write(cfg, rows, PSEUDO_TRUE_COLUMNS, "pseudo_true")


@app.command()
def verify(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
):
    """Derivative, KL, stationarity, no-mismatch and SNR-scaling checks."""
    cfg = _load(config, seed=seed)
    report = _run("verify", lambda: run_verify(cfg))
    console.print(verify_table(report))
    if not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        console.print(f"[bold red]✖[/bold red] Failed checks: {failed}")
        raise typer.Exit(code=EXIT_VERIFY_FAILED)
    console.print("\n[bold green]✅ All invariant checks passed![/bold green]")
