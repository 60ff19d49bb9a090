"""Numerical checks of the regret analysis.

Everything here enumerates finite parameter sets exactly, so identities are
tested to machine precision and inequalities without Monte-Carlo noise. The
only randomized pieces are the instance generators and the regret
experiments.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from fgts.agents import AgentConfig, PosteriorKind, StepResult, run_bandit
from fgts.environments import (
    BanditEnv,
    BanditInstance,
    MdpSpec,
    QFunction,
    QFunctionFamily,
    counterexample_env,
    counterexample_mdp,
    env_from_model,
    optimal_q,
    random_finite_bandit,
    random_finite_mdp,
    random_linear_embed,
    random_q,
)
from fgts.errors import ContradictionError, InvalidInputError
from fgts.models import (
    Actions,
    Context,
    HistoryEntry,
    LinearEmbed,
    LossSpec,
    Param,
    ValueModel,
    delta_loss,
    truncate_value,
)
from fgts.posterior import OmegaFilter, member_mask
from fgts.records import RegretRecord

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-10
DECOMPOSITION_TOL = 1e-12
DC_TOL = 1e-9


# =========================================================
# Bandit regret pieces
# =========================================================
def instantaneous_regret(env: BanditEnv, x: Context, a) -> float:
    return env.regret(x, a)


def regret_decomposition(
    model: ValueModel, theta: Param, x: Context, env: BanditEnv, actions: Actions, b: float = math.inf
):
    """(BE, FG) with BE = f_b(theta, x, a) - f*(x, a) and FG = f_b(theta, x) - f*(x),
    where a is the greedy action of theta. BE - FG is the regret of a."""
    a, value = model.best(theta, x, actions)
    truncated = truncate_value(value, b)
    return truncated - env.true_mean(x, a), truncated - env.optimal_value(x)


def prop1_lower_bound(N: int, T: int) -> float:
    """Expected regret floor of standard Thompson Sampling on the two-armed counterexample."""
    if N < 1 or T < 1:
        raise InvalidInputError(f"N and T must be >= 1, got N={N}, T={T}")
    return 0.5 * T * (1.0 - 1.0 / N) ** T


def finite_regret_bound(N: int, K: int, T: int, delta: float = 0.0, delta_prime: float = 0.0) -> float:
    if min(N, K, T) < 1:
        raise InvalidInputError(f"N, K and T must be >= 1, got N={N}, K={K}, T={T}")
    bound = 4.0 * math.sqrt((K + 2) * T * math.log(N))
    if delta > 0:
        if not delta_prime > 0:
            raise InvalidInputError("delta_prime must be positive when delta > 0")
        ratio = 1.0 + delta_prime / delta + delta / delta_prime
        bound += 4.0 * ratio * math.sqrt(K + 2) * delta * T
    return bound


# =========================================================
# Decoupling coefficient
# =========================================================
@dataclass(frozen=True)
class MuParameter:
    grid: np.ndarray = field(default_factory=lambda: np.geomspace(1e-3, 1e3, 61))

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0):
            raise InvalidInputError("mu grid must be a nonempty vector of positive reals")
        object.__setattr__(self, "grid", grid)


class DecoupleReport(NamedTuple):
    context: Hashable
    lhs: float
    a_term: float
    lower_bound: float
    claimed_k: Optional[float] = None
    mu_bound: Optional[float] = None
    mu_opt: Optional[float] = None

    @property
    def violated(self) -> bool:
        return self.claimed_k is not None and self.lower_bound > self.claimed_k + DC_TOL


def _decouple(
    context: Hashable,
    q: np.ndarray,
    residuals: np.ndarray,
    greedy: np.ndarray,
    mu: MuParameter,
    claimed_k: Optional[float],
) -> DecoupleReport:
    """``residuals[i, k]`` is the error of member i at choice k; member i picks ``greedy[i]``."""
    lhs = float(q @ residuals[np.arange(q.size), greedy])
    pi = np.bincount(greedy, weights=q, minlength=residuals.shape[1])
    a_term = float(pi @ (q @ residuals**2))
    if a_term <= 0.0:
        if lhs > 0.0:
            raise ContradictionError(f"decoupled squared error is 0 but the expected error is {lhs:.3e} at {context!r}")
        lower = 0.0
    else:
        lower = max(0.0, lhs) ** 2 / a_term
    mu_bound = mu_opt = None
    if claimed_k is not None:
        mu_bound = float(np.min(mu.grid * a_term + claimed_k / (4.0 * mu.grid)))
        mu_opt = math.sqrt(claimed_k / (4.0 * a_term)) if a_term > 0 else math.inf
    return DecoupleReport(context, lhs, a_term, lower, claimed_k, mu_bound, mu_opt)


def _check_q(q, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (n,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"theta: q must be a distribution over {n} members")
    return q


def dc_estimate(
    q,
    x: Context,
    model: ValueModel,
    env: BanditEnv,
    b: float = math.inf,
    mu: Optional[MuParameter] = None,
    claimed_K: Optional[float] = None,
) -> DecoupleReport:
    """Exact per-q lower bound on the decoupling coefficient at context ``x``."""
    actions = env.action_set(x)
    values = model.all_values(x, actions)
    q = _check_q(q, values.shape[0])
    f_star = np.array([env.true_mean(x, a) for a in actions])
    residuals = np.clip(values, -b, b) - f_star
    return _decouple(x, q, residuals, np.argmax(values, axis=1), mu or MuParameter(), claimed_K)


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float
    rank: int


def appendix_b_identity_check(q, x: Context, model: LinearEmbed, env: BanditEnv) -> IdentityCheck:
    """Decoupled squared error computed directly and through the eigenbasis of
    the feature covariance under the induced action distribution."""
    if env.true_weight is None:
        raise InvalidInputError("environment has no true weight vector")
    actions = env.action_set(x)
    n = model.n_params
    q = _check_q(q, n)
    phi = model.feature_matrix(x, actions)
    w_err = np.stack([model.weights(i, x) for i in range(n)]) - env.true_weight
    greedy = np.argmax(model.all_values(x, actions), axis=1)
    pi = np.bincount(greedy, weights=q, minlength=len(actions))
    lhs = float(pi @ (q @ (w_err @ phi.T) ** 2))
    sigma = (phi * pi[:, None]).T @ phi
    try:
        eigvals, eigvecs = np.linalg.eigh(sigma)
    except np.linalg.LinAlgError as exc:
        logger.warning("⚠️ eigendecomposition failed: %s", exc)
        return IdentityCheck(lhs, math.nan, math.nan, 0)
    keep = eigvals > 1e-12 * max(eigvals.max(), 1e-300)
    basis = eigvecs[:, keep]
    q_j = q @ (w_err @ basis) ** 2
    spread = q @ (phi[greedy] @ basis) ** 2
    rhs = float(q_j @ spread)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs), int(keep.sum()))


# =========================================================
# MDP pieces
# =========================================================
def bellman_error(spec: MdpSpec, f: QFunction, h: int, x, a) -> float:
    target = spec.mean_reward(h, x, a) + f.state_value(spec, h + 1, spec.next_state(h, x, a))
    return f.value(h, x, a) - target


def _greedy_path(spec: MdpSpec, f: QFunction, x1):
    path, x = [], x1
    for h in range(1, spec.horizon + 1):
        a, _ = f.greedy(spec, h, x)
        path.append((h, x, a))
        x = spec.next_state(h, x, a)
    return path


class MdpDecomposition(NamedTuple):
    regret: float
    bellman_sum: float
    feelgood: float
    gap: float


def mdp_regret_decomposition_check(
    spec: MdpSpec, f: QFunction, x1, q_star: Optional[QFunction] = None
) -> MdpDecomposition:
    """Regret of f's greedy policy versus sum of Bellman errors minus f^1(x1) - V^1(x1)."""
    q_star = optimal_q(spec) if q_star is None else q_star
    path = _greedy_path(spec, f, x1)
    v1 = q_star.state_value(spec, 1, x1)
    regret = v1 - sum(spec.mean_reward(h, x, a) for h, x, a in path)
    bellman_sum = sum(bellman_error(spec, f, h, x, a) for h, x, a in path)
    feelgood = f.state_value(spec, 1, x1) - v1
    return MdpDecomposition(regret, bellman_sum, feelgood, abs(regret - (bellman_sum - feelgood)))


def mdp_dc_estimate(
    q, spec: MdpSpec, family: QFunctionFamily, x1, h: int, mu: Optional[MuParameter] = None
) -> DecoupleReport:
    """Stage-h decoupling bound: member i's Bellman error at the level-h pair
    visited by member k's greedy policy. The claim is the number of level-h pairs."""
    q = _check_q(q, len(family))
    pairs = spec.pairs(h)
    index = {pair: k for k, pair in enumerate(pairs)}
    greedy = np.array([index[tuple(_greedy_path(spec, f, x1)[h - 1][1:])] for f in family.members])
    residuals = np.array(
        [[bellman_error(spec, f, h, x, a) for x, a in pairs] for f in family.members]
    )
    return _decouple(h, q, residuals, greedy, mu or MuParameter(), float(len(pairs)))


# =========================================================
# Traces
# =========================================================
def log_partition_trace(
    history: Sequence[HistoryEntry],
    spec: LossSpec,
    model: ValueModel,
    prior,
    env: BanditEnv,
    omega_filter: Optional[OmegaFilter] = None,
) -> np.ndarray:
    """Z_t = -ln sum_theta p0(theta) exp(-sum_s excess loss) over Omega_t, for t = 0..T."""
    with np.errstate(divide="ignore"):
        log_prior = np.log(np.asarray(prior, dtype=np.float64))
    n = log_prior.size
    total = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    trace = [0.0]
    for entry in history:
        x, a, r = entry.context, entry.action, entry.reward
        mean, best = env.true_mean(x, a), env.optimal_value(x)
        total += [delta_loss(spec, model, j, x, entry.actions, a, r, mean, best) for j in range(n)]
        if omega_filter is not None and omega_filter.active:
            alive &= member_mask(model, x, entry.actions, omega_filter.b)
        trace.append(-float(logsumexp(np.where(alive, log_prior - total, -np.inf))))
    return np.array(trace)


def delta_t_trace(steps: Sequence[StepResult], model: ValueModel, theta_star: Param) -> np.ndarray:
    """Cumulative posterior-averaged squared prediction error at the played pairs."""
    out, total = [], 0.0
    for step in steps:
        if step.weights is None:
            raise InvalidInputError("steps carry no posterior weights; run with track_weights=True")
        predicted = model.all_values(step.context, [step.action])[:, 0]
        truth = model.value(theta_star, step.context, step.action)
        total += float(step.weights @ (predicted - truth) ** 2)
        out.append(total)
    return np.array(out)


# =========================================================
# Bayesian regret
# =========================================================
class BayesianRegret(NamedTuple):
    mean: np.ndarray
    se: np.ndarray
    frequentist_mean: np.ndarray
    frequentist_se: np.ndarray
    slices: Dict[int, np.ndarray]
    delta_t: np.ndarray
    records: List[List[RegretRecord]]


def _mean_se(curves: np.ndarray):
    se = curves.std(axis=0, ddof=1) / math.sqrt(len(curves)) if len(curves) > 1 else np.zeros(curves.shape[1])
    return curves.mean(axis=0), se


def bayesian_regret_experiment(
    instance: BanditInstance,
    config: AgentConfig,
    T: int,
    runs: int,
    rng: np.random.Generator,
    run_prefix: str = "bayes",
) -> BayesianRegret:
    """Average regret over theta* drawn from the prior, next to the regret at
    the instance's own theta*. ``records`` keeps the per-run rows of the
    prior-drawn runs."""
    if runs < 1:
        raise InvalidInputError(f"runs must be >= 1, got {runs}")
    base, model, prior = instance
    prior = np.asarray(prior, dtype=np.float64)
    bayes, freq, deltas, drawn, kept = [], [], [], [], []
    for r in range(runs):
        run_rng, freq_rng = rng.spawn(2)
        theta_star = int(run_rng.choice(prior.size, p=prior))
        env = env_from_model(model, theta_star, base.action_set, base.noise, base.contexts, name=f"bayes-{theta_star}")
        steps: List[StepResult] = []
        records = run_bandit(BanditInstance(env, model, prior), config, T, run_rng, f"{run_prefix}-{r}", steps.append, True)
        kept.append(records)
        bayes.append([rec.cum_regret for rec in records])
        deltas.append(delta_t_trace(steps, model, theta_star))
        drawn.append(theta_star)
        records = run_bandit(instance, config, T, freq_rng, f"freq-{r}")
        freq.append([rec.cum_regret for rec in records])
    bayes, freq = np.array(bayes), np.array(freq)
    drawn = np.array(drawn)
    slices = {int(j): bayes[drawn == j].mean(axis=0) for j in np.unique(drawn)}
    mean, se = _mean_se(bayes)
    f_mean, f_se = _mean_se(freq)
    logger.info("✅ Bayesian regret at T=%d: %.3f (frequentist %.3f)", T, mean[-1], f_mean[-1])
    return BayesianRegret(mean, se, f_mean, f_se, slices, np.mean(deltas, axis=0), kept)


# =========================================================
# Check suite
# =========================================================
class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    detail: str


SUITE_SIZES = {
    "desk": dict(
        decomposition=1000, mdp_decomposition=100, eigenbasis=100,
        finite_action_dc=200, linear_embed_dc=100, n_q=50, floor_runs=500,
    ),
    "quick": dict(
        decomposition=100, mdp_decomposition=20, eigenbasis=20,
        finite_action_dc=20, linear_embed_dc=20, n_q=10, floor_runs=200,
    ),
}


def _random_q(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.full(n, rng.choice([0.2, 1.0, 5.0])))


def _check_decomposition(n: int, rng) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        env, model = random_finite_bandit(int(rng.integers(1, 9)), int(rng.integers(1, 6)), rng)
        theta = int(rng.integers(model.n_params))
        b = float(rng.choice([1.0, math.inf]))
        actions = env.action_set(0)
        be, fg = regret_decomposition(model, theta, 0, env, actions, b)
        regret = env.regret(0, model.best(theta, 0, actions)[0])
        worst = max(worst, abs(be - fg - regret))
    return CheckResult("regret_decomposition", worst <= DECOMPOSITION_TOL, worst, f"max |BE - FG - regret| over {n} draws")


def _check_mdp_decomposition(n: int, rng) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        spec = random_finite_mdp(3, 4, 3, rng)
        q_star = optimal_q(spec)
        f = random_q(spec, rng)
        x1 = spec.initial_states[int(rng.integers(len(spec.initial_states)))]
        worst = max(worst, mdp_regret_decomposition_check(spec, f, x1, q_star).gap)
    return CheckResult("mdp_decomposition", worst <= IDENTITY_TOL, worst, f"max gap over {n} random MDPs")


def _check_eigenbasis(n: int, rng) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        env, model = random_linear_embed(5, 4, 3, rng)
        worst = max(worst, appendix_b_identity_check(_random_q(5, rng), 0, model, env).gap)
    return CheckResult("eigenbasis_identity", worst <= IDENTITY_TOL, worst, f"max gap over {n} instances")


def _check_finite_action_dc(n: int, n_q: int, rng) -> CheckResult:
    worst = -math.inf
    for _ in range(n):
        k = int(rng.integers(1, 6))
        env, model = random_finite_bandit(int(rng.integers(1, 9)), k, rng)
        b = float(rng.choice([1.0, math.inf]))
        for _ in range(n_q):
            report = dc_estimate(_random_q(model.n_params, rng), 0, model, env, b, claimed_K=k)
            worst = max(worst, report.lower_bound - k)
    return CheckResult("dc_finite_actions", worst <= DC_TOL, worst, "max (bound - K)")


def _check_linear_embed_dc(n: int, n_q: int, rng) -> CheckResult:
    worst = -math.inf
    for _ in range(n):
        k = int(rng.integers(1, 5))
        env, model = random_linear_embed(int(rng.integers(2, 9)), k + int(rng.integers(1, 5)), k, rng)
        for _ in range(n_q):
            report = dc_estimate(_random_q(model.n_params, rng), 0, model, env, 1.0, claimed_K=k)
            worst = max(worst, report.lower_bound - k)
    return CheckResult("dc_linear_embed", worst <= DC_TOL, worst, "max (bound - embedding dim)")


def _check_stagewise_dc(n_q: int, rng) -> CheckResult:
    spec, family, _ = counterexample_mdp(3, 10)
    worst = -math.inf
    for h in range(1, spec.horizon + 1):
        for _ in range(n_q):
            report = mdp_dc_estimate(_random_q(len(family), rng), spec, family, "start", h)
            worst = max(worst, report.lower_bound - report.claimed_k)
    return CheckResult("dc_stagewise", worst <= DC_TOL, worst, "max (bound - level pairs)")


def _check_regret_floor(runs: int, rng) -> CheckResult:
    N, T = 20, 20
    instance = counterexample_env(N)
    config = AgentConfig(LossSpec(eta=0.25, lam=0.0, b=1.0), PosteriorKind.discrete)
    finals = np.array(
        [run_bandit(instance, config, T, child)[-1].cum_regret for child in rng.spawn(runs)]
    )
    mean, se = finals.mean(), finals.std(ddof=1) / math.sqrt(runs)
    bound = prop1_lower_bound(N, T)
    return CheckResult("ts_regret_floor", mean >= bound - 3 * se, mean, f"bound {bound:.3f}, se {se:.3f}")


def run_check_suite(rng: np.random.Generator, scale: str = "desk") -> List[CheckResult]:
    if scale not in SUITE_SIZES:
        raise InvalidInputError(f"unknown check scale {scale!r}")
    n = SUITE_SIZES[scale]
    results = [
        _check_decomposition(n["decomposition"], rng),
        _check_mdp_decomposition(n["mdp_decomposition"], rng),
        _check_eigenbasis(n["eigenbasis"], rng),
        _check_finite_action_dc(n["finite_action_dc"], n["n_q"], rng),
        _check_linear_embed_dc(n["linear_embed_dc"], n["n_q"], rng),
        _check_stagewise_dc(n["n_q"], rng),
        _check_regret_floor(n["floor_runs"], rng),
    ]
    for r in results:
        if r.passed:
            logger.info("✅ %s: %.3e (%s)", r.name, r.value, r.detail)
        else:
            logger.error("❌ %s failed: %.3e (%s)", r.name, r.value, r.detail)
    return results
