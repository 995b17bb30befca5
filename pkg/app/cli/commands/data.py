"""
Data Commands - synthetic dataset generation and split export
"""

import json
from pathlib import Path
from typing import List, Optional

import typer
from loguru import logger

from app.cli.errors import cli_errors
from app.cli.options import apply_overrides, load_config
from app.core.exceptions import ConfigError
from app.services.datasets import dataset_service, generate_gaussian_mixture, generate_rings, save_csv


@cli_errors
def gen_data(
    out: Path = typer.Option(..., "--out", "-o", help="CSV to write"),
    source: str = typer.Option("gaussian_mixture", "--source", help="gaussian_mixture or rings"),
    classes: int = typer.Option(2, "--classes"),
    per_class: int = typer.Option(200, "--per-class"),
    dim: int = typer.Option(2, "--dim", help="Feature dimension (gaussian_mixture)"),
    separation: float = typer.Option(3.0, "--separation", help="Distance between cluster means"),
    noise: float = typer.Option(0.1, "--noise", help="Radial noise (rings)"),
    distractor_classes: int = typer.Option(0, "--distractor-classes", help="Extra clusters labeled -1"),
    seed: int = typer.Option(0, "--seed"),
):
    """Write a synthetic dataset as CSV (header f0..f{d-1},label)"""

    if source == "gaussian_mixture":
        dataset = generate_gaussian_mixture(seed, classes, per_class, dim, separation, distractor_classes)
    elif source == "rings":
        dataset = generate_rings(seed, classes, per_class, noise, distractor_classes)
    else:
        raise ConfigError(f"--source must be 'gaussian_mixture' or 'rings', got '{source}'")

    save_csv(dataset, out)
    logger.info(f"Wrote {dataset.n_rows} rows to {out}")
    typer.echo(str(out))


@cli_errors
def split(
    config: Path = typer.Option(..., "--config", "-c", help="JSON training config (its data section is used)"),
    out: Path = typer.Option(..., "--out", "-o", help="JSON file for the index sets"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run seed (data seed defaults to it)"),
    assignments: Optional[List[str]] = typer.Option(None, "--set", help="Nested override KEY=VALUE"),
):
    """Write labeled/unlabeled/test index sets; unlabeled labels are not exported"""

    resolved = apply_overrides(load_config(config), {"seed": seed}, assignments)
    dataset, ssl_split = dataset_service.prepare(resolved.data, resolved.data_seed())

    payload = {"dataset": dataset.name, "class_count": dataset.class_count, **ssl_split.to_dict()}
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    typer.echo(str(out))
