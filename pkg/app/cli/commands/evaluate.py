"""
Eval Command - re-score a finished run on its test or unlabeled rows
"""

from pathlib import Path

import typer

from app.cli.errors import cli_errors
from app.cli.options import load_config
from app.core.exceptions import ConfigError
from app.services.datasets import dataset_service
from app.services.trainer import CONFIG_FILE, evaluate as evaluate_model, trainer_service


@cli_errors
def evaluate(
    run_dir: Path = typer.Argument(..., help="Run directory written by train"),
    rows: str = typer.Option("test", "--rows", help="test or unlabeled"),
):
    """Nearest-prototype accuracy of a checkpointed model"""

    if rows not in ("test", "unlabeled"):
        raise ConfigError(f"--rows must be 'test' or 'unlabeled', got '{rows}'")

    config = load_config(run_dir / CONFIG_FILE)
    dataset, split = dataset_service.prepare(config.data, config.data_seed())
    params, prototypes, _, _ = trainer_service.load_model(run_dir, dataset.dim)

    if rows == "test":
        features, labels = dataset.features[split.test], dataset.labels[split.test]
    else:
        # Distractor rows have no class and are left out
        labels = split.hidden_unlabeled_labels()
        keep = labels >= 0
        features, labels = dataset.features[split.unlabeled][keep], labels[keep]

    accuracy = evaluate_model(params, prototypes, features, labels)
    typer.echo(f"{accuracy:.6f}")
