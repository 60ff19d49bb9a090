"""Ground-truth bandit and MDP instances.

Bandit environments wrap a value model evaluated at a fixed ``theta_star``
so that f*(x, a) = f(theta_star, x, a). Actions are 0-based: in the
two-armed counterexample arm 0 is the safe arm and arm 1 the risky one.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from fgts.errors import InvalidEnvError, InvalidInputError
from fgts.models import (
    Action,
    Actions,
    Context,
    HistoryEntry,
    Param,
    PureLinear,
    SphereArms,
    TabularFinite,
    TabularLinearEmbed,
    ValueModel,
    Vector,
)
from fgts.posterior import GaussianPrior

logger = logging.getLogger(__name__)

SAFE_ARM = 0
RISKY_ARM = 1


# =========================================================
# Reward noise and context schedules
# =========================================================
class NoiseKind(str, enum.Enum):
    none = "none"
    uniform = "uniform"
    bernoulli = "bernoulli"
    gaussian = "gaussian"


@dataclass(frozen=True)
class RewardNoise:
    """``uniform`` draws from [-scale, scale]; ``gaussian`` has std ``scale``."""

    kind: NoiseKind = NoiseKind.none
    scale: float = 0.0

    def __post_init__(self):
        if self.scale < 0:
            raise InvalidInputError(f"noise scale must be nonnegative, got {self.scale}")
        if self.kind == NoiseKind.uniform and self.scale > 0.5:
            logger.warning("⚠️ uniform noise half-width %s exceeds the sub-Gaussian constant", self.scale)
        if self.kind == NoiseKind.gaussian and self.scale > 0.5:
            logger.warning("⚠️ gaussian noise std %s exceeds the sub-Gaussian constant", self.scale)

    def sample(self, mean: float, rng: np.random.Generator) -> float:
        if self.kind == NoiseKind.none:
            return float(mean)
        if self.kind == NoiseKind.uniform:
            return float(mean + rng.uniform(-self.scale, self.scale))
        if self.kind == NoiseKind.gaussian:
            return float(mean + self.scale * rng.standard_normal())
        if not 0.0 <= mean <= 1.0:
            raise InvalidInputError(f"bernoulli rewards need a mean in [0, 1], got {mean}")
        return float(rng.random() < mean)


class ContextSchedule:
    """Source of contexts: a fixed cycled sequence, an i.i.d. sampler, or an
    adversary that sees the full history."""

    def __init__(
        self,
        sequence: Optional[Sequence[Context]] = None,
        sampler: Optional[Callable[[np.random.Generator], Context]] = None,
        adversary: Optional[Callable[[Sequence[HistoryEntry]], Context]] = None,
    ):
        given = [s is not None for s in (sequence, sampler, adversary)]
        if sum(given) != 1:
            raise InvalidInputError("context schedule needs exactly one of sequence, sampler, adversary")
        if sequence is not None and len(sequence) == 0:
            raise InvalidInputError("context sequence is empty")
        self.sequence = list(sequence) if sequence is not None else None
        self.sampler = sampler
        self.adversary = adversary

    @classmethod
    def fixed(cls, *contexts: Context) -> "ContextSchedule":
        return cls(sequence=list(contexts))

    def next(self, t: int, history: Sequence[HistoryEntry], rng: np.random.Generator) -> Context:
        """Context for round ``t`` (1-based)."""
        if self.sequence is not None:
            return self.sequence[(t - 1) % len(self.sequence)]
        if self.sampler is not None:
            return self.sampler(rng)
        return self.adversary(history)


# =========================================================
# Bandit environments
# =========================================================
@dataclass(frozen=True)
class BanditEnv:
    name: str
    mean_model: ValueModel
    theta_star: Param
    action_set: Callable[[Context], Actions]
    contexts: ContextSchedule
    noise: RewardNoise = RewardNoise()
    theory_regime: bool = True
    true_weight: Optional[Vector] = None
    _optimal_cache: Dict[Hashable, float] = field(default_factory=dict, repr=False, compare=False)

    def true_mean(self, x: Context, a: Action) -> float:
        return self.mean_model.value(self.theta_star, x, a)

    def optimal_value(self, x: Context) -> float:
        try:
            return self._optimal_cache[x]
        except (KeyError, TypeError):
            pass
        value = self.mean_model.best(self.theta_star, x, self.action_set(x))[1]
        try:
            self._optimal_cache[x] = value
        except TypeError:
            pass
        return value

    def optimal_action(self, x: Context) -> Action:
        return self.mean_model.best(self.theta_star, x, self.action_set(x))[0]

    def contains(self, x: Context, a: Action) -> bool:
        return self.mean_model.contains(x, self.action_set(x), a)

    def regret(self, x: Context, a: Action) -> float:
        if not self.contains(x, a):
            raise InvalidInputError(f"action {a!r} is not in the action set of context {x!r}")
        return max(0.0, self.optimal_value(x) - self.true_mean(x, a))


class BanditInstance(NamedTuple):
    env: BanditEnv
    model: ValueModel
    prior: object


def sample_reward(env: BanditEnv, x: Context, a: Action, rng: np.random.Generator) -> float:
    if not env.contains(x, a):
        raise InvalidInputError(f"action {a!r} is not in the action set of context {x!r}")
    return env.noise.sample(env.true_mean(x, a), rng)


def _index_actions(n_actions: int) -> Callable[[Context], Actions]:
    actions = tuple(range(n_actions))
    return lambda x: actions


def env_from_model(
    model: ValueModel,
    theta_star: Param,
    actions: Callable[[Context], Actions],
    noise: RewardNoise,
    contexts: ContextSchedule,
    name: str = "realizable",
    theory_regime: bool = True,
) -> BanditEnv:
    """Realizable environment with f* = f(theta_star, ., .)."""
    true_weight = None
    if isinstance(model, TabularLinearEmbed):
        true_weight = model.w_table[int(theta_star), 0].copy()
    return BanditEnv(
        name=name,
        mean_model=model,
        theta_star=theta_star,
        action_set=actions,
        contexts=contexts,
        noise=noise,
        theory_regime=theory_regime,
        true_weight=true_weight,
    )


def counterexample_env(N: int) -> BanditInstance:
    """Two arms, one context. theta_1 = theta* pays 1 on the risky arm; the
    decoys theta_j pay 0.4 j/N there. Every member pays 0.5 on the safe arm."""
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidInputError(f"class size N must be >= 1, got {N!r}")
    table = np.empty((N, 1, 2))
    table[:, 0, SAFE_ARM] = 0.5
    table[0, 0, RISKY_ARM] = 1.0
    for j in range(2, N + 1):
        table[j - 1, 0, RISKY_ARM] = 0.4 * j / N
    model = TabularFinite(table)
    env = BanditEnv(
        name=f"counterexample-N{N}",
        mean_model=model,
        theta_star=0,
        action_set=_index_actions(2),
        contexts=ContextSchedule.fixed(0),
        noise=RewardNoise(NoiseKind.bernoulli),
    )
    return BanditInstance(env, model, np.full(N, 1.0 / N))


def sample_sphere_arms(n_arms: int, dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n_arms`` vectors (0, a') with a' uniform on the radius sphere in R^(dim-1)."""
    g = rng.standard_normal((n_arms, dim - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    arms = np.zeros((n_arms, dim))
    arms[:, 1:] = radius * g
    return arms


def linear_env_paper(
    dim: int = 100,
    n_arms: Optional[int] = 50,
    radius: float = 0.2,
    noise_half_width: float = 0.5,
    prior_precision: float = 100.0,
    seed: int = 0,
) -> BanditInstance:
    """Non-contextual linear bandit with theta* = e1 + e2 and best arm e1.

    ``n_arms`` sphere arms are sampled once from ``seed`` and offered every
    round after e1; ``n_arms=None`` offers the whole sphere.
    """
    if dim < 2:
        raise InvalidInputError(f"dimension must be >= 2, got {dim}")
    theta_star = np.zeros(dim)
    theta_star[:2] = 1.0
    anchor = np.zeros(dim)
    anchor[0] = 1.0
    if n_arms is None:
        actions = SphereArms(anchor, radius)
    else:
        if n_arms < 1:
            raise InvalidInputError(f"arm count must be >= 1, got {n_arms}")
        sphere = sample_sphere_arms(n_arms, dim, radius, np.random.default_rng(seed))
        actions = np.vstack([anchor, sphere])
    model = PureLinear(dim)
    env = BanditEnv(
        name=f"linear-d{dim}",
        mean_model=model,
        theta_star=theta_star,
        action_set=lambda x: actions,
        contexts=ContextSchedule.fixed(0),
        noise=RewardNoise(NoiseKind.uniform, noise_half_width),
        theory_regime=False,
    )
    return BanditInstance(env, model, GaussianPrior(prior_precision, dim))


def random_finite_bandit(
    n_params: int, n_actions: int, rng: np.random.Generator, n_contexts: int = 1
) -> Tuple[BanditEnv, TabularFinite]:
    """Model values in [-2, 2]; the environment's f* is an independent table in [0, 1]."""
    model = TabularFinite(rng.uniform(-2.0, 2.0, size=(n_params, n_contexts, n_actions)))
    truth = TabularFinite(rng.uniform(0.0, 1.0, size=(1, n_contexts, n_actions)))
    env = BanditEnv(
        name="random-finite",
        mean_model=truth,
        theta_star=0,
        action_set=_index_actions(n_actions),
        contexts=ContextSchedule.fixed(*range(n_contexts)),
    )
    return env, model


def random_linear_embed(
    n_params: int, n_arms: int, K: int, rng: np.random.Generator, b: float = 1.0
) -> Tuple[BanditEnv, TabularLinearEmbed]:
    """Features on the simplex, true weight in [0, 1]^K and model weights in
    [-b, b]^K, so f* lies in [0, 1] and every f(theta, x, a) >= -b."""
    phi = rng.dirichlet(np.ones(K), size=(1, n_arms))
    w_star = rng.uniform(0.0, 1.0, size=(1, 1, K))
    w = rng.uniform(-b, b, size=(n_params, 1, K))
    model = TabularLinearEmbed(w, phi)
    truth = TabularLinearEmbed(w_star, phi)
    env = env_from_model(
        truth,
        0,
        _index_actions(n_arms),
        RewardNoise(),
        ContextSchedule.fixed(0),
        name="random-linear-embed",
    )
    return env, model


# =========================================================
# Deterministic-transition MDPs
# =========================================================
State = Hashable


class MdpStep(NamedTuple):
    h: int
    state: State
    action: Action
    reward: float
    next_state: Optional[State]


@dataclass(frozen=True)
class MdpSpec:
    """Episodic MDP with levels 1..H and deterministic transitions.

    ``transitions[(h, x, a)]`` is the level-(h+1) state; entries for h = H
    are ignored. Mean rewards lie in [0, 1].
    """

    horizon: int
    states: Dict[int, Tuple[State, ...]]
    valid_actions: Dict[Tuple[int, State], Tuple[Action, ...]]
    transitions: Dict[Tuple[int, State, Action], State]
    mean_rewards: Dict[Tuple[int, State, Action], float]
    noise: RewardNoise = RewardNoise()
    initial_states: Tuple[State, ...] = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidInputError(f"horizon H must be >= 1, got {self.horizon}")
        for h in range(1, self.horizon + 1):
            if not self.states.get(h):
                raise InvalidEnvError(f"level {h} has no states")
        for x in self.initial_states:
            if x not in self.states[1]:
                raise InvalidEnvError(f"initial state {x!r} is not a level-1 state")
        for (h, x, a), m in self.mean_rewards.items():
            if not 0.0 <= m <= 1.0:
                raise InvalidEnvError(f"mean reward {m} at ({h}, {x!r}, {a!r}) outside [0, 1]")
        for (h, x, a), nxt in self.transitions.items():
            if h < self.horizon and nxt not in self.states[h + 1]:
                raise InvalidEnvError(f"transition ({h}, {x!r}, {a!r}) leaves level {h + 1}")

    def _check_state(self, h: int, x: State) -> None:
        if h not in self.states:
            raise InvalidEnvError(f"stage {h} outside [1, {self.horizon}]")
        if x not in self.states[h]:
            raise InvalidEnvError(f"state {x!r} is not at level {h}")

    def actions(self, h: int, x: State) -> Tuple[Action, ...]:
        self._check_state(h, x)
        actions = self.valid_actions.get((h, x), ())
        if not actions:
            raise InvalidEnvError(f"state {x!r} at level {h} has no valid actions")
        return actions

    def _check_action(self, h: int, x: State, a: Action) -> None:
        if a not in self.actions(h, x):
            raise InvalidEnvError(f"action {a!r} is not valid at ({h}, {x!r})")

    def next_state(self, h: int, x: State, a: Action) -> Optional[State]:
        self._check_action(h, x, a)
        if h == self.horizon:
            return None
        return self.transitions[(h, x, a)]

    def mean_reward(self, h: int, x: State, a: Action) -> float:
        self._check_action(h, x, a)
        return self.mean_rewards[(h, x, a)]

    def pairs(self, h: int) -> List[Tuple[State, Action]]:
        return [(x, a) for x in self.states[h] for a in self.actions(h, x)]


@dataclass(frozen=True)
class QFunction:
    """Stage-indexed values f^h(x, a); f^(H+1) is identically zero."""

    name: str
    table: Dict[Tuple[int, State, Action], float]
    horizon: int

    def value(self, h: int, x: Optional[State], a: Action) -> float:
        if h == self.horizon + 1:
            return 0.0
        try:
            return self.table[(h, x, a)]
        except KeyError:
            raise InvalidEnvError(f"{self.name} has no value at ({h}, {x!r}, {a!r})") from None

    def greedy(self, spec: MdpSpec, h: int, x: State) -> Tuple[Action, float]:
        """First enumerated action wins ties."""
        best_a, best_v = None, -math.inf
        for a in spec.actions(h, x):
            v = self.value(h, x, a)
            if v > best_v:
                best_a, best_v = a, v
        return best_a, best_v

    def state_value(self, spec: MdpSpec, h: int, x: Optional[State]) -> float:
        if h == self.horizon + 1 or x is None:
            return 0.0
        return self.greedy(spec, h, x)[1]


@dataclass(frozen=True)
class QFunctionFamily:
    members: Tuple[QFunction, ...]
    realizable_index: Optional[int] = None

    def __post_init__(self):
        if not self.members:
            raise InvalidInputError("Q-function family is empty")

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> QFunction:
        return self.members[i]


def mdp_rollout(
    spec: MdpSpec, f: QFunction, x1: State, rng: np.random.Generator
) -> List[MdpStep]:
    """Greedy episode of ``f`` from ``x1``."""
    if x1 not in spec.states[1]:
        raise InvalidEnvError(f"initial state {x1!r} is not a level-1 state")
    steps = []
    x = x1
    for h in range(1, spec.horizon + 1):
        a, _ = f.greedy(spec, h, x)
        reward = spec.noise.sample(spec.mean_reward(h, x, a), rng)
        nxt = spec.next_state(h, x, a)
        steps.append(MdpStep(h, x, a, reward, nxt))
        x = nxt
    return steps


def optimal_q(spec: MdpSpec) -> QFunction:
    """Backward induction of the true Q."""
    table: Dict[Tuple[int, State, Action], float] = {}
    q = QFunction("Q*", table, spec.horizon)
    for h in range(spec.horizon, 0, -1):
        for x, a in spec.pairs(h):
            nxt = spec.next_state(h, x, a)
            table[(h, x, a)] = spec.mean_reward(h, x, a) + q.state_value(spec, h + 1, nxt)
    return q


def episode_regret(spec: MdpSpec, q_star: QFunction, x1: State, steps: Sequence[MdpStep]) -> float:
    """V^1(x1) minus the mean return of the played trajectory."""
    mean_return = sum(spec.mean_reward(s.h, s.state, s.action) for s in steps)
    return q_star.state_value(spec, 1, x1) - mean_return


def counterexample_mdp(H: int, N: int) -> Tuple[MdpSpec, QFunctionFamily, np.ndarray]:
    """Chain analogue of the two-armed counterexample.

    From ``start`` action 0 enters the ``safe`` chain (0.5 per step) and
    action 1 the ``risky`` chain (1.0 per step). Decoy j agrees with Q on the
    safe chain and values the risky chain at 0.4 (j/N) per remaining step, so
    along the safe path every member fits the data equally well.
    """
    if H < 1 or N < 2:
        raise InvalidInputError(f"counterexample MDP needs H >= 1 and N >= 2, got H={H}, N={N}")
    states: Dict[int, Tuple[State, ...]] = {1: ("start",)}
    valid: Dict[Tuple[int, State], Tuple[Action, ...]] = {(1, "start"): (SAFE_ARM, RISKY_ARM)}
    transitions = {(1, "start", SAFE_ARM): "safe", (1, "start", RISKY_ARM): "risky"}
    means = {(1, "start", SAFE_ARM): 0.5, (1, "start", RISKY_ARM): 1.0}
    for h in range(2, H + 1):
        states[h] = ("safe", "risky")
        for x, m in (("safe", 0.5), ("risky", 1.0)):
            valid[(h, x)] = (0,)
            transitions[(h, x, 0)] = x
            means[(h, x, 0)] = m
    spec = MdpSpec(
        horizon=H,
        states=states,
        valid_actions=valid,
        transitions=transitions,
        mean_rewards=means,
        noise=RewardNoise(NoiseKind.bernoulli),
        initial_states=("start",),
    )
    q_star = optimal_q(spec)
    members = [QFunction("Q", dict(q_star.table), H)]
    for j in range(2, N + 1):
        slope = 0.4 * j / N
        table = {(1, "start", SAFE_ARM): 0.5 * H, (1, "start", RISKY_ARM): slope * H}
        for h in range(2, H + 1):
            table[(h, "safe", 0)] = 0.5 * (H - h + 1)
            table[(h, "risky", 0)] = slope * (H - h + 1)
        members.append(QFunction(f"decoy-{j}", table, H))
    return spec, QFunctionFamily(tuple(members), realizable_index=0), np.full(N, 1.0 / N)


def random_finite_mdp(
    H: int, n_states: int, n_actions: int, rng: np.random.Generator
) -> MdpSpec:
    if min(H, n_states, n_actions) < 1:
        raise InvalidInputError("random MDP sizes must be >= 1")
    states = {h: tuple(range(n_states)) for h in range(1, H + 1)}
    valid, transitions, means = {}, {}, {}
    for h in range(1, H + 1):
        for x in range(n_states):
            valid[(h, x)] = tuple(range(n_actions))
            for a in range(n_actions):
                means[(h, x, a)] = float(rng.uniform())
                if h < H:
                    transitions[(h, x, a)] = int(rng.integers(n_states))
    return MdpSpec(
        horizon=H,
        states=states,
        valid_actions=valid,
        transitions=transitions,
        mean_rewards=means,
        initial_states=states[1],
    )


def random_q(spec: MdpSpec, rng: np.random.Generator, name: str = "random") -> QFunction:
    """Random stage values in [0, H - h + 1]."""
    table = {}
    for h in range(1, spec.horizon + 1):
        for x, a in spec.pairs(h):
            table[(h, x, a)] = float(rng.uniform(0.0, spec.horizon - h + 1))
    return QFunction(name, table, spec.horizon)
