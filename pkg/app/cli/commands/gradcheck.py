"""
Gradcheck Command - finite-difference verification of every loss gradient
"""

from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from app.cli.errors import cli_errors
from app.services.gradcheck import gradcheck_service


@cli_errors
def gradcheck(
    seeds: Optional[int] = typer.Option(None, "--seeds", min=1, help="Random instances (default GRADCHECK_SEEDS)"),
    tolerance: Optional[float] = typer.Option(None, "--tolerance", help="Max relative error (default GRADCHECK_TOLERANCE)"),
    step: Optional[float] = typer.Option(None, "--step", help="Finite-difference step h"),
):
    """Compare analytic and central-difference gradients; exit 1 on any failure"""

    report = gradcheck_service.run(seeds=seeds, tolerance=tolerance, step=step)

    table = Table(title=f"Gradient check ({report.seeds} seeds, h={report.step:g})")
    table.add_column("term", style="cyan")
    table.add_column("worst relative error", justify="right")
    table.add_column("seed", justify="right")
    table.add_column("status")
    for term in report.terms:
        table.add_row(
            term.term,
            f"{term.worst_relative_error:.3e}",
            str(term.worst_seed),
            "[green]ok[/green]" if term.passed else "[red]FAIL[/red]",
        )
    Console().print(table)

    if not report.passed:
        typer.echo(f"gradient check failed: {', '.join(report.failed_terms)}", err=True)
        raise typer.Exit(code=1)
