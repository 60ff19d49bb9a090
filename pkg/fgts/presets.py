"""Canned experiment configs.

The linear-bandit preset does not pin a horizon in the source experiment;
``PAPER_T`` and ``DESK_T`` are our choice and are flagged as such in the docs.
"""
import enum
import math

from fgts.agents import PosteriorKind
from fgts.errors import InvalidInputError
from fgts.schemas import AgentSchema, ArmSet, EnvConfig, EnvKind, ExperimentConfig, Mode, SgldConfig

FIG1_LAMBDAS = [0.0, 0.01, 0.1, 1.0]
PAPER_T = 500
DESK_T = 300


class Scale(str, enum.Enum):
    paper = "paper"
    desk = "desk"


def preset_fig1(scale: Scale = Scale.desk) -> ExperimentConfig:
    """Linear bandit in R^100: eta=1, rho=100, b=inf, SGLD step 0.01 with t updates per round.

    Both scales play the full radius-0.2 sphere next to the anchor arm e1.
    The desk scale only shortens the horizon and the run count.
    """
    scale = Scale(scale)
    paper = scale == Scale.paper
    return ExperimentConfig(
        name=f"fig1-{scale.value}",
        mode=Mode.bandit,
        env=EnvConfig(kind=EnvKind.linear, dim=100, arm_set=ArmSet.sphere),
        agent=AgentSchema(
            eta=1.0,
            lambdas=list(FIG1_LAMBDAS),
            b=math.inf,
            posterior=PosteriorKind.sgld,
            sgld=SgldConfig(step_size=0.01, steps_per_round="t"),
            prior_precision=100.0,
        ),
        T=PAPER_T if paper else DESK_T,
        runs=100 if paper else 20,
    )


def preset_counterexample(N: int = 20, T: int = 20, runs: int = 500) -> ExperimentConfig:
    """Two-armed counterexample with the standard and the 1/sqrt(T) Feel-Good agent."""
    if N < 2:
        raise InvalidInputError(f"class size N must be >= 2, got {N}")
    if T < 1 or runs < 1:
        raise InvalidInputError(f"T and runs must be >= 1, got T={T}, runs={runs}")
    return ExperimentConfig(
        name=f"counterexample-N{N}-T{T}",
        mode=Mode.bandit,
        env=EnvConfig(kind=EnvKind.counterexample, n_models=N),
        agent=AgentSchema(eta=0.25, lambdas=[0.0, 1.0 / math.sqrt(T)], b=1.0, posterior=PosteriorKind.discrete),
        T=T,
        runs=runs,
    )
