"""
Train Command - run one training job from a JSON config plus flag overrides
"""

import json
from pathlib import Path
from typing import List, Optional

import typer
from loguru import logger

from app.cli.errors import cli_errors
from app.cli.options import apply_overrides, load_config, parse_int_list
from app.core.exceptions import ConfigError
from app.services.datasets import dataset_service
from app.services.trainer import trainer_service


@cli_errors
def train(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON training config"),
    print_config: bool = typer.Option(False, "--print-config", help="Print the resolved config as JSON and exit"),
    run_dir: Optional[Path] = typer.Option(None, "--run-dir", help="Output directory (default: RUNS_DIR/seed<seed>-lmmd<lambda>)"),
    resume: bool = typer.Option(False, "--resume", help="Continue from the run directory's checkpoint"),
    stop_after: Optional[int] = typer.Option(None, "--stop-after", min=1, help="Stop after this many epochs"),
    # TrainConfig overrides
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Labeled batch size B"),
    mu: Optional[int] = typer.Option(None, "--mu", help="Unlabeled ratio"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    eta0: Optional[float] = typer.Option(None, "--eta0", help="Initial learning rate"),
    momentum: Optional[float] = typer.Option(None, "--momentum"),
    lr_schedule: Optional[str] = typer.Option(None, "--lr-schedule", help="epoch or step"),
    grad_clip: Optional[float] = typer.Option(None, "--grad-clip"),
    tau: Optional[float] = typer.Option(None, "--tau", help="Confidence threshold"),
    temperature: Optional[float] = typer.Option(None, "--temperature", help="Contrastive temperature"),
    pseudo_temperature: Optional[float] = typer.Option(None, "--pseudo-temperature"),
    temperature_placement: Optional[str] = typer.Option(None, "--temperature-placement", help="standard or printed"),
    lambda_mmd: Optional[float] = typer.Option(None, "--lambda-mmd"),
    epsilon_p: Optional[float] = typer.Option(None, "--epsilon-p", help="Entropy threshold for MMD selection"),
    selection_temperature: Optional[str] = typer.Option(None, "--selection-temperature", help="none or pseudo"),
    hidden_widths: Optional[str] = typer.Option(None, "--hidden-widths", help="Comma-separated, e.g. 64,32"),
    embed_dim: Optional[int] = typer.Option(None, "--embed-dim"),
    activation: Optional[str] = typer.Option(None, "--activation", help="relu or tanh"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    assignments: Optional[List[str]] = typer.Option(None, "--set", help="Nested override KEY=VALUE, e.g. data.classes=3"),
):
    """Train the encoder and prototypes; prints the run directory"""

    if config is None and not print_config:
        raise ConfigError("--config is required (use --print-config for the default template)")

    resolved = apply_overrides(
        load_config(config),
        {
            "batch_size": batch_size,
            "mu": mu,
            "epochs": epochs,
            "eta0": eta0,
            "momentum": momentum,
            "lr_schedule": lr_schedule,
            "grad_clip": grad_clip,
            "tau": tau,
            "temperature": temperature,
            "pseudo_temperature": pseudo_temperature,
            "temperature_placement": temperature_placement,
            "lambda_mmd": lambda_mmd,
            "epsilon_p": epsilon_p,
            "selection_temperature": selection_temperature,
            "hidden_widths": parse_int_list(hidden_widths, "--hidden-widths") if hidden_widths else None,
            "embed_dim": embed_dim,
            "activation": activation,
            "seed": seed,
        },
        assignments,
    )

    if print_config:
        typer.echo(json.dumps(resolved.model_dump(mode="json"), indent=2))
        return

    dataset, split = dataset_service.prepare(resolved.data, resolved.data_seed())
    result = trainer_service.train(
        resolved,
        split.training_view(dataset),
        run_dir=run_dir,
        resume=resume,
        stop_after_epochs=stop_after,
    )
    if result.final_accuracy is not None:
        logger.info(f"Final test accuracy: {result.final_accuracy:.4f}")
    typer.echo(result.run_dir)
