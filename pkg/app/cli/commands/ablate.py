"""
Ablate Command - base vs. w.mmd over several seeds
"""

from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console

from app.cli.errors import cli_errors
from app.cli.options import apply_overrides, load_config, parse_int_list
from app.services.ablation import SUMMARY_FILE, ablation_service


@cli_errors
def ablate(
    config: Path = typer.Option(..., "--config", "-c", help="JSON training config"),
    seeds: str = typer.Option("0,1,2,3,4", "--seeds", help="Comma-separated seeds"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Default: RUNS_DIR/ablation"),
    lambda_mmd: Optional[float] = typer.Option(None, "--lambda-mmd", help="lambda_mmd of the w.mmd arm"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    assignments: Optional[List[str]] = typer.Option(None, "--set", help="Nested override KEY=VALUE"),
):
    """Train both arms per seed and print mean test accuracy per arm"""

    resolved = apply_overrides(load_config(config), {"lambda_mmd": lambda_mmd, "epochs": epochs}, assignments)
    summary = ablation_service.run(resolved, parse_int_list(seeds, "--seeds"), output_dir)
    ablation_service.render(summary, Console())
    typer.echo(str(Path(summary.output_dir) / SUMMARY_FILE))
