import typer

from fgts.commands.run import execute
from fgts.presets import Scale, preset_fig1
from fgts.schemas import with_overrides


# ✅ Linear bandit regret curves for lambda in {0, 0.01, 0.1, 1}
def fig1_command(
    scale: Scale = typer.Option(Scale.desk, "--scale", help="paper: 100 runs, T=500; desk: 20 runs, T=300"),
    n_jobs: int = typer.Option(1, "--n-jobs", help="parallel workers"),
    seed: int = typer.Option(0, "--seed"),
):
    """Reproduce the linear-bandit regret figure."""
    config = with_overrides(preset_fig1(scale), n_jobs=n_jobs, seed=seed)
    execute(config)
