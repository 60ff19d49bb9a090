import numpy as np
import typer
from rich.table import Table

from fgts.commands.run import console
from fgts.diagnostics import run_check_suite
from fgts.errors import CheckFailedError


# ✅ Identity, decoupling and regret-floor checks
def check_command(
    scale: str = typer.Option("desk", "--scale", help="desk or quick"),
    seed: int = typer.Option(0, "--seed"),
):
    """Run the diagnostics suite; exit code 2 if any check fails."""
    results = run_check_suite(np.random.default_rng(seed), scale)
    table = Table(title="diagnostics")
    table.add_column("check")
    table.add_column("value", justify="right")
    table.add_column("detail")
    table.add_column("status")
    for r in results:
        table.add_row(r.name, f"{r.value:.3e}", r.detail, "✅" if r.passed else "❌")
    console.print(table)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailedError(f"failed checks: {', '.join(failed)}")
