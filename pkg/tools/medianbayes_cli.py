from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, List, Optional, TypeVar

import typer
from dotenv import load_dotenv

from medianbayes.errors import ConfigError, MedianBayesError
from medianbayes.harness import config as study_config
from medianbayes.harness import io as study_io
from medianbayes.harness import report, study

LOGGER = logging.getLogger(__name__)
app = typer.Typer(add_completion=False, help="Bayesian nonparametric location tests and power studies")

EXIT_CONFIG = 1
EXIT_RUNTIME = 2
T = TypeVar("T")


def _setup(verbose: bool, env_file: Optional[Path]) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    if env_file is not None:
        if not env_file.exists():
            raise ConfigError(f".env file not found: {env_file}")
        load_dotenv(env_file)
        LOGGER.info("Loaded environment variables from %s", env_file)
    elif Path(".env").exists():
        load_dotenv(Path(".env"))
        LOGGER.info("Loaded environment variables from .env")


def _guarded(action: Callable[[], T]) -> T:
    try:
        return action()
    except ConfigError as exc:
        typer.echo(f"config error: {exc}", err=True)
        raise typer.Exit(EXIT_CONFIG)
    except MedianBayesError as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(EXIT_RUNTIME)


def _methods(raw: str) -> List[str]:
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    unknown = [m for m in methods if m not in study_config.METHODS]
    if not methods or unknown:
        raise ConfigError(f"--method: unknown or empty methods {unknown or raw!r}")
    return methods


def _emit(payload: dict, out: Optional[Path]) -> None:
    text = report.render_json(payload)
    if out is None:
        typer.echo(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    typer.echo(f"✅ {out}")


def _test_config(alpha: float, config_path: Optional[Path]) -> study_config.StudyConfig:
    return study_config.load_config(config_path, overrides={"alpha": alpha})


@app.command("test1")
def test1(
    data: Path = typer.Option(..., "--data", help="Headerless CSV, one observation per row"),
    theta0: str = typer.Option(None, "--theta0", help="Null location, e.g. 0,0 (default: origin)"),
    method: str = typer.Option("npbayes", "--method", help="Comma-separated methods"),
    alpha: float = typer.Option(0.05, "--alpha"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    header: bool = typer.Option(False, "--header", help="Skip the first line"),
    config: Optional[Path] = typer.Option(None, "--config", help="YAML with prior and draw settings"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON report here"),
    verbose: bool = typer.Option(False, "--verbose"),
    env_file: Optional[Path] = typer.Option(None, "--env-file"),
):
    """One-sample test of H0: theta(P) = theta0."""

    def run() -> dict:
        _setup(verbose, env_file)
        settings = _test_config(alpha, config)
        sample = study_io.read_matrix(data, header=header)
        null = study_io.parse_vector(theta0) if theta0 else None
        return study.run_single_test(sample, null, methods=_methods(method), config=settings, seed=seed)

    _emit(_guarded(run), out)


@app.command("test2")
def test2(
    data1: Path = typer.Option(..., "--data1"),
    data2: Path = typer.Option(..., "--data2"),
    method: str = typer.Option("npbayes", "--method", help="Comma-separated methods"),
    alpha: float = typer.Option(0.05, "--alpha"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the first sample (or both)"),
    seed2: Optional[int] = typer.Option(None, "--seed2", help="Separate seed for the second sample"),
    header: bool = typer.Option(False, "--header", help="Skip the first line of each file"),
    config: Optional[Path] = typer.Option(None, "--config"),
    out: Optional[Path] = typer.Option(None, "--out"),
    verbose: bool = typer.Option(False, "--verbose"),
    env_file: Optional[Path] = typer.Option(None, "--env-file"),
):
    """Two-sample test of H0: theta(P1) = theta(P2)."""

    def run() -> dict:
        _setup(verbose, env_file)
        settings = _test_config(alpha, config)
        first, second = study_io.read_pair(data1, data2, header=header)
        seeds = seed if seed2 is None else (seed, seed2)
        return study.run_single_test(first, data2=second, methods=_methods(method), config=settings, seed=seeds)

    _emit(_guarded(run), out)


def _study_config(
    config: Optional[Path],
    preset: Optional[str],
    reps: Optional[int],
    full: bool,
    seed: Optional[int],
    workers: Optional[int],
    method: Optional[str],
) -> study_config.StudyConfig:
    if config is None and preset is None:
        raise ConfigError("pass --config FILE or --preset NAME")
    overrides = {
        "replications": study_config.FULL_REPLICATIONS if full else reps,
        "seed": seed,
        "workers": workers,
        "methods": _methods(method) if method else None,
    }
    return study_config.load_config(config, preset=preset, overrides=overrides)


def _report(table: report.PowerTable, out: Optional[Path], tag: bool = False) -> None:
    if out is None:
        typer.echo(report.render_markdown(table))
        return
    for path in report.write_exports(table, out, tagged=tag):
        typer.echo(f"✅ {path}")


@app.command("power")
def power(
    config: Optional[Path] = typer.Option(None, "--config", help="YAML file with a study: section"),
    preset: Optional[str] = typer.Option(None, "--preset", help="table1 | table2 | curve"),
    reps: Optional[int] = typer.Option(None, "--reps"),
    full: bool = typer.Option(False, "--full", help="Use 2000 replications"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Default: MEDIANBAYES_WORKERS or 1"),
    method: Optional[str] = typer.Option(None, "--method", help="Comma-separated methods"),
    out: Optional[Path] = typer.Option(None, "--out", help="FILE.csv; .md and .json are written alongside"),
    tag: bool = typer.Option(False, "--tag", help="Append study kind and seed to the report names"),
    verbose: bool = typer.Option(False, "--verbose"),
    env_file: Optional[Path] = typer.Option(None, "--env-file"),
):
    """Monte Carlo power table."""

    def run() -> report.PowerTable:
        _setup(verbose, env_file)
        settings = _study_config(config, preset, reps, full, seed, workers, method)
        return study.run_power_study(settings)

    _report(_guarded(run), out, tag)


@app.command("powercmp")
def powercmp(
    config: Optional[Path] = typer.Option(None, "--config"),
    preset: Optional[str] = typer.Option(None, "--preset"),
    reps: Optional[int] = typer.Option(None, "--reps"),
    full: bool = typer.Option(False, "--full", help="Use 2000 replications"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers"),
    method: Optional[str] = typer.Option(None, "--method"),
    out: Optional[Path] = typer.Option(None, "--out"),
    tag: bool = typer.Option(False, "--tag", help="Append study kind and seed to the report names"),
    verbose: bool = typer.Option(False, "--verbose"),
    env_file: Optional[Path] = typer.Option(None, "--env-file"),
):
    """Theoretical local power next to empirical power along an h grid."""

    def run() -> report.PowerTable:
        _setup(verbose, env_file)
        settings = _study_config(config, preset, reps, full, seed, workers, method)
        return study.run_power_comparison(settings)

    _report(_guarded(run), out, tag)


__all__ = ["app"]


if __name__ == "__main__":
    app()
