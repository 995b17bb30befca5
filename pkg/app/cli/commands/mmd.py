"""
MMD Command - squared MMD between two feature CSVs
"""

from pathlib import Path

import typer

from app.cli.errors import cli_errors
from app.core.exceptions import ConfigError, DataFormatError
from app.services.datasets import load_feature_matrix
from app.services.mmd import mmd_between


@cli_errors
def mmd(
    a: Path = typer.Option(..., "--a", help="First feature CSV"),
    b: Path = typer.Option(..., "--b", help="Second feature CSV"),
    sigma: str = typer.Option("median", "--sigma", help="Kernel bandwidth, or 'median'"),
):
    """Print the biased MMD estimate to 12 significant digits"""

    if sigma == "median":
        bandwidth = "median"
    else:
        try:
            bandwidth = float(sigma)
        except ValueError as exc:
            raise ConfigError(f"--sigma must be a number or 'median', got '{sigma}'") from exc
        if not bandwidth > 0:
            raise ConfigError(f"--sigma must be positive, got {bandwidth}")

    first, second = load_feature_matrix(a), load_feature_matrix(b)
    if first.shape[1] != second.shape[1]:
        raise DataFormatError(f"feature widths differ: {a} has {first.shape[1]}, {b} has {second.shape[1]}")

    typer.echo(f"{mmd_between(first, second, bandwidth):.12g}")
