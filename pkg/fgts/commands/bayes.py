from pathlib import Path

import typer
from rich.table import Table

from fgts.commands.run import console, execute, require_mode
from fgts.schemas import Mode
from fgts.storage import load_config


# ✅ Bayesian regret (theta* drawn from the prior) next to the fixed-theta* regret
def bayes_command(config: Path = typer.Argument(..., exists=True, dir_okay=False, help="YAML config with mode: bayes")):
    """Average regret over the prior and contrast it with the frequentist slice."""
    cfg = load_config(config)
    require_mode(cfg, Mode.bayes)
    result = execute(cfg)
    table = Table(title=f"{cfg.name}: Bayesian vs frequentist regret at T={cfg.T}")
    for column in ("λ", "Bayesian", "± SE", "fixed θ*", "± SE", "Δ_T"):
        table.add_column(column, justify="right")
    for lam, out in result.bayes.items():
        table.add_row(
            f"{lam:g}",
            f"{out.mean[-1]:.4f}",
            f"{out.se[-1]:.4f}",
            f"{out.frequentist_mean[-1]:.4f}",
            f"{out.frequentist_se[-1]:.4f}",
            f"{out.delta_t[-1]:.4f}",
        )
    console.print(table)
