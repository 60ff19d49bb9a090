from pathlib import Path

import typer

from fgts.commands.run import execute, require_mode
from fgts.schemas import Mode
from fgts.storage import load_config


# ✅ Episodic Thompson Sampling on a deterministic-transition MDP
def mdp_command(config: Path = typer.Argument(..., exists=True, dir_okay=False, help="YAML config with mode: mdp")):
    """Run the episodic agent described by a config."""
    cfg = load_config(config)
    require_mode(cfg, Mode.mdp)
    execute(cfg)
