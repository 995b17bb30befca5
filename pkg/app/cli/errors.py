"""
Command error boundary

Maps failures to the exit-code contract: 0 success, 1 runtime failure,
2 usage/config error.
"""

import functools
from typing import Callable

import click
import typer
from loguru import logger
from pydantic import ValidationError

from app.core.exceptions import EngineError


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        path = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{path}: {error['msg']}")
    return "\n".join(lines)


def cli_errors(command: Callable) -> Callable:
    """Run a command inside the error boundary"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (typer.Exit, typer.Abort, click.ClickException):
            raise
        except ValidationError as exc:
            typer.echo(f"Invalid configuration:\n{format_validation_error(exc)}", err=True)
            raise typer.Exit(code=2)
        except EngineError as exc:
            logger.error(f"{type(exc).__name__}: {exc.message}")
            typer.echo(f"Error: {exc.message}", err=True)
            raise typer.Exit(code=exc.exit_code)
        except Exception as exc:
            logger.exception(f"Unhandled exception: {exc}")
            typer.echo(f"Error: {exc}", err=True)
            raise typer.Exit(code=1)

    return wrapper
