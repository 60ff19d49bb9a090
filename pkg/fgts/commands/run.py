import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from fgts.errors import ConfigError
from fgts.schemas import ExperimentConfig, Mode
from fgts.services.plotting import emit_plot_data
from fgts.services.runner import ExperimentResult, final_summary, run_experiment
from fgts.storage import load_config, output_dir

logger = logging.getLogger(__name__)

console = Console()


def summary_table(result: ExperimentResult, reference: Optional[Tuple[str, float]] = None) -> Table:
    table = Table(title=f"{result.config.name} (T={result.config.T}, runs={result.config.runs})")
    table.add_column("λ", justify="right")
    table.add_column("final mean cum. regret", justify="right")
    table.add_column("± SE", justify="right")
    rows = final_summary(result)[["lambda", "mean_cum_regret", "se"]]
    for lam, mean, se in rows.itertuples(index=False, name=None):
        table.add_row(f"{lam:g}", f"{mean:.4f}", f"{se:.4f}")
    if reference is not None:
        label, value = reference
        table.add_row(label, f"{value:.4f}", "")
    return table


def execute(
    config: ExperimentConfig,
    reference_curve: Optional[Tuple[str, np.ndarray]] = None,
) -> ExperimentResult:
    """Run, persist and summarise one experiment."""
    result = run_experiment(config)
    emit_plot_data(result, output_dir(config.output), reference_curve)
    reference = None
    if reference_curve is not None:
        reference = (reference_curve[0], float(reference_curve[1][-1]))
    console.print(summary_table(result, reference))
    return result


def require_mode(config: ExperimentConfig, mode: Mode) -> None:
    if config.mode != mode:
        raise ConfigError(f"mode: expected {mode.value}, config says {config.mode.value}")


# ✅ Any mode, routed by the config
def run_command(config: Path = typer.Argument(..., exists=True, dir_okay=False, help="YAML experiment config")):
    """Run the experiment described by a YAML config."""
    execute(load_config(config))
