import enum
import math
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, field_validator, model_validator

from fgts.agents import AgentConfig, EtaRegime, PosteriorKind, default_eta
from fgts.errors import ConfigError
from fgts.models import LossSpec


class Mode(str, enum.Enum):
    bandit = "bandit"
    mdp = "mdp"
    bayes = "bayes"


class EnvKind(str, enum.Enum):
    counterexample = "counterexample"
    linear = "linear"
    counterexample_mdp = "counterexample_mdp"


class ArmSet(str, enum.Enum):
    sampled = "sampled"
    sphere = "sphere"


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -------- ENVIRONMENT --------
class EnvConfig(Strict):
    kind: EnvKind = EnvKind.counterexample
    n_models: int = Field(20, ge=1, description="class size N of the counterexample")
    horizon: int = Field(2, ge=1, description="episode length H of the MDP counterexample")
    dim: int = Field(100, ge=2)
    n_arms: int = Field(50, ge=1, description="sphere arms sampled when arm_set=sampled")
    arm_set: ArmSet = ArmSet.sampled
    arm_seed: int = Field(0, ge=0)
    radius: float = Field(0.2, gt=0)
    noise_half_width: float = Field(0.5, ge=0)

    @model_validator(mode="after")
    def check_class_size(self):
        if self.kind == EnvKind.counterexample_mdp and self.n_models < 2:
            raise ValueError(f"n_models must be >= 2 for the {self.kind.value} env, got {self.n_models}")
        return self


# -------- AGENT --------
class SgldConfig(Strict):
    step_size: float = Field(0.01, gt=0)
    steps_per_round: Union[Literal["t"], PositiveInt] = "t"


class AgentSchema(Strict):
    eta: Optional[float] = Field(None, gt=0, description="learning rate; defaults per env kind when unset")
    lambdas: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    b: float = Field(math.inf, gt=0)
    posterior: PosteriorKind = PosteriorKind.discrete
    sgld: SgldConfig = Field(default_factory=SgldConfig)
    omega_filter: bool = False
    prior_precision: float = Field(100.0, gt=0)

    @model_validator(mode="after")
    def check_lambdas(self):
        if any(not lam >= 0 for lam in self.lambdas):
            raise ValueError("every lambda must be nonnegative")
        return self

    def loss(self, lam: float, eta: float) -> LossSpec:
        return LossSpec(eta=eta, lam=lam, b=self.b)


# -------- EXPERIMENT --------
class ExperimentConfig(Strict):
    name: str = "experiment"
    mode: Mode = Mode.bandit
    env: EnvConfig = Field(default_factory=EnvConfig)
    agent: AgentSchema = Field(default_factory=AgentSchema)
    T: int = Field(20, ge=1, description="rounds (bandit) or episodes (mdp)")
    runs: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    output: str = "results"
    n_jobs: int = Field(1, ge=-1, description="joblib workers; -1 uses every core")

    @field_validator("n_jobs")
    @classmethod
    def check_n_jobs(cls, value: int) -> int:
        if value == 0:
            raise ValueError("n_jobs must be a positive worker count or -1")
        return value

    @model_validator(mode="after")
    def check_combination(self):
        is_mdp_env = self.env.kind == EnvKind.counterexample_mdp
        if (self.mode == Mode.mdp) != is_mdp_env:
            raise ValueError(f"mode {self.mode.value} does not fit env kind {self.env.kind.value}")
        if self.agent.posterior == PosteriorKind.sgld and self.env.kind != EnvKind.linear:
            raise ValueError("the sgld posterior needs the linear env")
        if self.agent.posterior == PosteriorKind.discrete and self.env.kind == EnvKind.linear:
            raise ValueError("the linear env has a continuous parameter; use the sgld posterior")
        if self.mode == Mode.bayes and self.env.kind != EnvKind.counterexample:
            raise ValueError("bayes mode needs a finite prior (env kind counterexample)")
        return self

    def resolved_eta(self) -> float:
        """Configured eta, else the default for the env kind (MDP: b = H)."""
        if self.agent.eta is not None:
            return self.agent.eta
        if self.env.kind == EnvKind.linear:
            return default_eta(EtaRegime.linear)
        if self.env.kind == EnvKind.counterexample_mdp:
            return default_eta(EtaRegime.mdp, H=self.env.horizon, b=float(self.env.horizon))
        return default_eta(EtaRegime.theory)

    def agent_config(self, lam: float) -> AgentConfig:
        return AgentConfig(
            loss=self.agent.loss(lam, self.resolved_eta()),
            posterior=self.agent.posterior,
            step_size=self.agent.sgld.step_size,
            steps_per_round=self.agent.sgld.steps_per_round,
            omega_filter=self.agent.omega_filter,
            seed=self.seed,
        )


def config_error(exc: ValidationError) -> ConfigError:
    """Flatten a pydantic error into one line per dotted key path."""
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return ConfigError("invalid config\n  " + "\n  ".join(lines))


def parse_config(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        raise config_error(exc) from None


def with_overrides(config: ExperimentConfig, **updates) -> ExperimentConfig:
    """Copy of ``config`` with top-level fields replaced and re-validated."""
    return parse_config({**config.model_dump(), **updates})
