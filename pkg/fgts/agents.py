"""Thompson Sampling decision loops.

``run_bandit`` drives a contextual bandit agent (standard when lambda = 0,
Feel-Good otherwise); ``run_mdp`` drives the episodic agent over a finite
Q-function family with the temporal-difference episode loss.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from fgts.environments import (
    BanditEnv,
    BanditInstance,
    MdpSpec,
    MdpStep,
    QFunctionFamily,
    episode_regret,
    mdp_rollout,
    optimal_q,
    sample_reward,
)
from fgts.errors import InvalidInputError, UnsupportedOperationError
from fgts.models import Action, Context, HistoryEntry, LossSpec, ValueModel, greedy_action
from fgts.posterior import (
    DiscretePosterior,
    GaussianPrior,
    OmegaFilter,
    PosteriorState,
    SgldPosterior,
    sample_posterior,
)
from fgts.records import RegretRecord, accumulate

logger = logging.getLogger(__name__)


class PosteriorKind(str, enum.Enum):
    discrete = "discrete"
    sgld = "sgld"


class EtaRegime(str, enum.Enum):
    theory = "theory"
    linear = "linear"
    mdp = "mdp"


@dataclass(frozen=True)
class AgentConfig:
    loss: LossSpec = field(default_factory=LossSpec)
    posterior: PosteriorKind = PosteriorKind.discrete
    step_size: float = 0.01
    steps_per_round: Union[str, int] = "t"
    omega_filter: bool = False
    seed: int = 0


def build_posterior(model: ValueModel, prior, config: AgentConfig) -> PosteriorState:
    if config.posterior == PosteriorKind.discrete:
        omega = OmegaFilter(config.loss.b, config.omega_filter)
        return DiscretePosterior(prior, model=model, spec=config.loss, omega_filter=omega)
    if not isinstance(prior, GaussianPrior):
        raise UnsupportedOperationError("the SGLD posterior needs a Gaussian prior")
    if config.omega_filter:
        logger.warning("⚠️ the Omega_t filter applies to discrete posteriors only; ignored for SGLD")
    return SgldPosterior(model, config.loss, prior, config.step_size, config.steps_per_round)


# =========================================================
# Bandit loop
# =========================================================
class StepResult(NamedTuple):
    t: int
    context: Context
    action: Action
    reward: float
    regret: float
    weights: Optional[np.ndarray] = None


class BanditAgent:
    def __init__(self, model: ValueModel, prior, config: AgentConfig, track_weights: bool = False):
        self.model = model
        self.config = config
        self.posterior = build_posterior(model, prior, config)
        self.track_weights = track_weights
        self.history: List[HistoryEntry] = []

    @property
    def t(self) -> int:
        return len(self.history)

    def act(self, x: Context, actions, rng: np.random.Generator) -> Tuple[Action, Optional[np.ndarray]]:
        weights = None
        if isinstance(self.posterior, DiscretePosterior):
            self.posterior.restrict(x, actions)
            if self.track_weights:
                weights = self.posterior.weights()
        theta = sample_posterior(self.posterior, rng)
        return greedy_action(self.model, theta, x, actions), weights

    def update(self, entry: HistoryEntry) -> None:
        self.history.append(entry)
        self.posterior.observe(entry)


def ts_bandit_step(agent: BanditAgent, env: BanditEnv, x: Context, rng: np.random.Generator) -> StepResult:
    """One round: draw theta_t, play its greedy action, observe and update."""
    actions = env.action_set(x)
    action, weights = agent.act(x, actions, rng)
    reward = sample_reward(env, x, action, rng)
    agent.update(HistoryEntry(x, action, reward, actions))
    return StepResult(agent.t, x, action, reward, env.regret(x, action), weights)


def run_bandit(
    instance: BanditInstance,
    config: AgentConfig,
    T: int,
    rng: Optional[np.random.Generator] = None,
    run_id: str = "run-0",
    on_step: Optional[Callable[[StepResult], None]] = None,
    track_weights: bool = False,
) -> List[RegretRecord]:
    if T < 1:
        raise InvalidInputError(f"horizon T must be >= 1, got {T}")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    env = instance.env
    agent = BanditAgent(instance.model, instance.prior, config, track_weights)
    regrets = []
    for t in range(1, T + 1):
        x = env.contexts.next(t, agent.history, rng)
        step = ts_bandit_step(agent, env, x, rng)
        regrets.append(step.regret)
        if on_step is not None:
            on_step(step)
    logger.debug("%s: lambda=%s T=%d cumulative regret %.4f", run_id, config.loss.lam, T, sum(regrets))
    return accumulate(run_id, regrets, config.loss.lam, config.seed)


# =========================================================
# Tuning helpers
# =========================================================
def recommended_lambda_finite(
    N: int, K: int, T: int, delta: float = 0.0, delta_prime: float = 0.0
) -> float:
    """delta'/sqrt(K+2) + sqrt(ln N / (4 (K+2) T)) for a finite class of size N."""
    if T < 1:
        raise InvalidInputError(f"horizon T must be >= 1, got {T}")
    if N < 1 or K < 1:
        raise InvalidInputError(f"class size and action bound must be >= 1, got N={N}, K={K}")
    if delta < 0 or delta_prime < 0:
        raise InvalidInputError("misspecification levels must be nonnegative")
    return delta_prime / math.sqrt(K + 2) + math.sqrt(math.log(N) / (4 * (K + 2) * T))


def recommended_lambda_parametric(d: int, K: int, T: int, delta_prime: float = 0.0) -> float:
    if T < 1 or d < 1 or K < 1:
        raise InvalidInputError(f"d, K and T must be >= 1, got d={d}, K={K}, T={T}")
    return math.sqrt(delta_prime / (K + 2)) + math.sqrt(d * math.log(d * T) / (4 * (K + 2) * T))


def recommended_lambda_mdp(d: int, K: int, H: int, b: float, T: int) -> float:
    if min(d, K, H, T) < 1 or not b > 0:
        raise InvalidInputError(f"d, K, H and T must be >= 1 and b > 0, got d={d}, K={K}, H={H}, b={b}, T={T}")
    return math.sqrt(d * math.log(H * d * T) / ((K + 2) * H * b * b * T))


def default_eta(regime: EtaRegime, H: Optional[int] = None, b: Optional[float] = None) -> float:
    regime = EtaRegime(regime)
    if regime == EtaRegime.theory:
        return 0.25
    if regime == EtaRegime.linear:
        return 1.0
    if H is None or b is None:
        raise InvalidInputError("the MDP learning rate needs the horizon H and the value range b")
    return min(0.25, 1.0 / (H * b * b))


# =========================================================
# Episodic loop
# =========================================================
@dataclass(frozen=True)
class EpisodeLossSpec:
    """Squared TD loss per stage plus the Feel-Good term -lambda * f^1(x^1)."""

    eta: float = 0.25
    lam: float = 0.0

    def __post_init__(self):
        if not self.eta > 0 or self.lam < 0:
            raise InvalidInputError(f"need eta > 0 and lambda >= 0, got eta={self.eta}, lambda={self.lam}")

    def stage_losses(self, spec: MdpSpec, family: QFunctionFamily, steps: Sequence[MdpStep]) -> np.ndarray:
        """(members, H) matrix of eta * (f^h(x^h, a^h) - r^h - f^(h+1)(x^(h+1)))^2."""
        out = np.empty((len(family), len(steps)))
        for i, f in enumerate(family.members):
            for k, s in enumerate(steps):
                target = s.reward + f.state_value(spec, s.h + 1, s.next_state)
                out[i, k] = self.eta * (f.value(s.h, s.state, s.action) - target) ** 2
        return out

    def feelgood_term(self, spec: MdpSpec, family: QFunctionFamily, x1) -> np.ndarray:
        return np.array([-self.lam * f.state_value(spec, 1, x1) for f in family.members])

    def episode_losses(self, spec: MdpSpec, family: QFunctionFamily, steps: Sequence[MdpStep]) -> np.ndarray:
        total = self.stage_losses(spec, family, steps).sum(axis=1)
        if self.lam == 0:
            return total
        return total + self.feelgood_term(spec, family, steps[0].state)


class MdpAgent:
    def __init__(self, family: QFunctionFamily, prior, loss: EpisodeLossSpec):
        self.family = family
        self.loss = loss
        self.posterior = DiscretePosterior(prior)
        if self.posterior.size != len(family):
            raise InvalidInputError(f"theta: prior has {self.posterior.size} entries, family has {len(family)}")
        self.episodes: List[List[MdpStep]] = []


def ts_mdp_episode(
    agent: MdpAgent, spec: MdpSpec, family: QFunctionFamily, x1, rng: np.random.Generator
) -> Tuple[List[MdpStep], MdpAgent]:
    """Draw f_t, roll out its greedy policy and fold the episode loss in."""
    f = family[sample_posterior(agent.posterior, rng)]
    steps = mdp_rollout(spec, f, x1, rng)
    agent.posterior.observe_losses(agent.loss.episode_losses(spec, family, steps))
    agent.episodes.append(steps)
    return steps, agent


def run_mdp(
    spec: MdpSpec,
    family: QFunctionFamily,
    prior,
    config: AgentConfig,
    T: int,
    rng: Optional[np.random.Generator] = None,
    run_id: str = "run-0",
) -> List[RegretRecord]:
    if T < 1:
        raise InvalidInputError(f"episode count T must be >= 1, got {T}")
    if not spec.initial_states:
        raise InvalidInputError("MDP has no initial states")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    agent = MdpAgent(family, prior, EpisodeLossSpec(config.loss.eta, config.loss.lam))
    q_star = optimal_q(spec)
    regrets = []
    for t in range(1, T + 1):
        x1 = spec.initial_states[(t - 1) % len(spec.initial_states)]
        steps, agent = ts_mdp_episode(agent, spec, family, x1, rng)
        regrets.append(max(0.0, episode_regret(spec, q_star, x1, steps)))
    return accumulate(run_id, regrets, config.loss.lam, config.seed)
