"""Command-line driver: `mixedorder run|validate|list-experiments`."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import experiments as ex
from .errors import ConfigInvalid, MixedOrderError, ResourceExceeded, TooLarge
from .output import dumps_json, write_run

EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4


def load_config_file(path: str) -> dict:
    """Parse a JSON config, or TOML (translated to the same dict) for a .toml suffix."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from None
    if p.suffix.lower() == ".toml":
        try:
            import tomllib as toml
        except ModuleNotFoundError:
            import tomli as toml
        try:
            data = toml.loads(text)
        except toml.TOMLDecodeError as exc:
            raise ConfigInvalid(f"malformed TOML: {exc}") from None
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be an object")
    return data


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose: int) -> None:
    """Exact and Monte Carlo experiments on symmetry breaking in mixed states."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@main.command("run")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Override output_dir.")
@click.option("--threads", type=int, default=None, help="Worker threads (fallback: MIXEDORDER_THREADS).")
def run_cmd(config: str, seed: int | None, out_dir: str | None, threads: int | None) -> None:
    """Run one experiment and write its artifacts."""
    try:
        data = load_config_file(config)
        if seed is not None:
            data["seed"] = seed
        if out_dir is not None:
            data["output_dir"] = out_dir
        cfg, params = ex.parse_config(data)
    except ConfigInvalid as exc:
        _fail(EXIT_CONFIG, str(exc))
    workers = threads if threads is not None else ex.default_workers()
    if workers < 1:
        _fail(EXIT_CONFIG, "--threads must be positive")
    try:
        result = ex.run_experiment(cfg, params, workers)
    except (ResourceExceeded, TooLarge) as exc:
        _fail(EXIT_RESOURCE, str(exc))
    except ConfigInvalid as exc:
        _fail(EXIT_CONFIG, str(exc))
    except (MixedOrderError, ArithmeticError, ValueError, MemoryError) as exc:
        _fail(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")
    paths = write_run(Path(cfg.output_dir), cfg.resolved(), result, workers)
    click.echo(f"wrote {len(paths)} files to {cfg.output_dir}")
    click.echo(dumps_json(result.summary), nl=False)


@main.command("validate")
@click.argument("config", type=click.Path(dir_okay=False))
def validate_cmd(config: str) -> None:
    """Check schema and resource estimates without running."""
    try:
        cfg, params = ex.parse_config(load_config_file(config))
    except ConfigInvalid as exc:
        _fail(EXIT_CONFIG, str(exc))
    est = ex.estimate(cfg.experiment, params)
    click.echo(f"experiment: {cfg.experiment}")
    click.echo(f"estimated memory: {est.memory_bytes / 2**20:.1f} MiB")
    click.echo(f"estimated runtime: {est.seconds:.1f} s (single worker)")
    for v in est.violations:
        click.echo(f"warning: ResourceExceeded: {v}")
    click.echo("OK" if est.ok else "NOT RUNNABLE")


@main.command("list-experiments")
def list_cmd() -> None:
    """List experiment names with one-line descriptions."""
    for name in ex.EXPERIMENTS:
        click.echo(f"{name:22s} {ex.DESCRIPTIONS[name]}")


if __name__ == "__main__":
    main()
