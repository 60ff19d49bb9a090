import numpy as np
import typer

from fgts.commands.run import execute
from fgts.diagnostics import prop1_lower_bound
from fgts.presets import preset_counterexample
from fgts.schemas import with_overrides


# ✅ Standard vs Feel-Good Thompson Sampling on the two-armed counterexample
def counterexample_command(
    N: int = typer.Option(20, "--N", help="class size"),
    T: int = typer.Option(20, "--T", help="rounds"),
    runs: int = typer.Option(500, "--runs"),
    n_jobs: int = typer.Option(1, "--n-jobs"),
    seed: int = typer.Option(0, "--seed"),
):
    """Compare lambda=0 and lambda=1/sqrt(T) against the standard-TS regret floor."""
    config = with_overrides(preset_counterexample(N, T, runs), n_jobs=n_jobs, seed=seed)
    floor = np.array([prop1_lower_bound(N, t) for t in range(1, T + 1)])
    execute(config, ("0.5 t (1-1/N)^t", floor))
