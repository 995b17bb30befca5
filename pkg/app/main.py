"""
SSC-MMD - Typer application
Main entry point for the command line
"""

from typing import Optional

import typer
from loguru import logger

from app import __version__
from app.core.config import settings
from app.core.logging import configure_logging
from app.cli.commands import ablate, evaluate, gen_data, gradcheck, mmd, split, train


# Create Typer application
app = typer.Typer(
    name="ssc-mmd",
    help="""
    Semi-supervised contrastive learning with prototype pseudo-labels and
    MMD distribution matching.

    Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
    """,
    add_completion=False,
    no_args_is_help=True,
)


def _version(value: bool) -> None:
    if value:
        typer.echo(f"{settings.APP_NAME} {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING, ... (default LOG_LEVEL)"),
    version: bool = typer.Option(False, "--version", callback=_version, is_eager=True, help="Show version and exit"),
):
    """Configure logging before any command runs"""
    configure_logging(log_level)
    logger.debug(f"{settings.APP_NAME} {__version__} ({settings.APP_ENV})")


# Register commands
app.command("train")(train)
app.command("eval")(evaluate)
app.command("ablate")(ablate)
app.command("gradcheck")(gradcheck)
app.command("mmd")(mmd)
app.command("gen-data")(gen_data)
app.command("split")(split)


def cli() -> None:
    app()
