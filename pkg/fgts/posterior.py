"""Posterior representations and samplers.

``DiscretePosterior`` keeps the exact generalized posterior over a finite
parameter set in the log domain (cumulative losses plus log prior, with an
optional Omega_t restriction). ``SgldPosterior`` carries one Langevin particle
across rounds and refreshes it with ``sgld_round`` before every draw.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from fgts.errors import EmptyPosteriorError, InvalidInputError, UnsupportedOperationError
from fgts.models import (
    Actions,
    Context,
    HistoryEntry,
    LossSpec,
    Param,
    ValueModel,
    Vector,
    loss_gradient,
)

logger = logging.getLogger(__name__)

STEP_SIZE = 0.01
NORMALIZATION_TOL = 1e-12


# =========================================================
# Priors and the Omega_t filter
# =========================================================
@dataclass(frozen=True)
class GaussianPrior:
    """Isotropic prior p0(theta) proportional to exp(-precision * ||theta||^2 / 2)."""

    precision: float = 100.0
    dim: int = 100

    def __post_init__(self):
        if not self.precision > 0:
            raise InvalidInputError(f"prior precision must be positive, got {self.precision}")
        if self.dim < 1:
            raise InvalidInputError(f"prior dimension must be >= 1, got {self.dim}")

    def sample(self, rng: np.random.Generator) -> Vector:
        return rng.standard_normal(self.dim) / math.sqrt(self.precision)

    def log_density(self, theta: Vector) -> float:
        return -0.5 * self.precision * float(theta @ theta)

    def grad_log_density(self, theta: Vector) -> Vector:
        return -self.precision * theta


@dataclass(frozen=True)
class OmegaFilter:
    b: float = math.inf
    enforce: bool = False

    @property
    def active(self) -> bool:
        return self.enforce and math.isfinite(self.b)


def omega_filter_pass(
    theta: Param,
    model: ValueModel,
    contexts: Sequence[Context],
    action_sets: Sequence[Actions],
    b: float,
) -> bool:
    """True iff f(theta, x_s, a) >= -b for every listed context and offered action."""
    if len(contexts) != len(action_sets):
        raise InvalidInputError(
            f"context: {len(contexts)} contexts but {len(action_sets)} action sets"
        )
    if not math.isfinite(b):
        return True
    return all(model.worst(theta, x, actions) >= -b for x, actions in zip(contexts, action_sets))


# =========================================================
# Exact posterior over a finite parameter set
# =========================================================
def _log_prior(prior) -> np.ndarray:
    prior = np.asarray(prior, dtype=np.float64)
    if prior.ndim != 1 or prior.size == 0:
        raise InvalidInputError("prior must be a nonempty weight vector")
    if np.any(prior < 0) or abs(prior.sum() - 1.0) > NORMALIZATION_TOL:
        raise InvalidInputError(f"prior must be nonnegative and sum to 1, sums to {prior.sum()!r}")
    with np.errstate(divide="ignore"):
        return np.log(prior)


def member_losses(spec: LossSpec, model: ValueModel, entry: HistoryEntry) -> np.ndarray:
    """Feel-Good loss of every member of a finite parameter set at one observation."""
    if not model.contains(entry.context, entry.actions, entry.action):
        raise InvalidInputError(f"action {entry.action!r} is not in the offered action set")
    played = model.all_values(entry.context, [entry.action])[:, 0]
    losses = spec.eta * (played - entry.reward) ** 2
    if spec.lam == 0:
        return losses
    best = model.all_values(entry.context, entry.actions).max(axis=1)
    return losses - spec.lam * np.minimum(spec.b, best)


def member_mask(model: ValueModel, x: Context, actions: Actions, b: float) -> np.ndarray:
    """Members with f(theta, x, a) >= -b for all offered actions."""
    return model.all_values(x, actions).min(axis=1) >= -b


def _normalize(log_w: np.ndarray) -> np.ndarray:
    if not np.any(np.isfinite(log_w)):
        raise EmptyPosteriorError("every parameter was removed by the Omega_t filter")
    return log_w - logsumexp(log_w)


def discrete_posterior_weights(
    history: Sequence[HistoryEntry],
    spec: LossSpec,
    model: ValueModel,
    prior,
    omega_filter: Optional[OmegaFilter] = None,
) -> np.ndarray:
    """Normalized posterior weights recomputed from the full history."""
    if model.n_params is None:
        raise UnsupportedOperationError("the exact posterior needs a finite parameter set")
    log_w = _log_prior(prior)
    if log_w.size != model.n_params:
        raise InvalidInputError(f"theta: prior has {log_w.size} entries, model has {model.n_params}")
    total = np.zeros_like(log_w)
    alive = np.ones(log_w.size, dtype=bool)
    for entry in history:
        total += member_losses(spec, model, entry)
        if omega_filter is not None and omega_filter.active:
            alive &= member_mask(model, entry.context, entry.actions, omega_filter.b)
    log_w = np.where(alive, log_w - total, -np.inf)
    return np.exp(_normalize(log_w))


class DiscretePosterior:
    """Incrementally updated exact posterior.

    ``model``/``spec`` are needed only by ``observe``; episodic agents feed
    precomputed loss vectors through ``observe_losses``.
    """

    def __init__(
        self,
        prior,
        model: Optional[ValueModel] = None,
        spec: Optional[LossSpec] = None,
        omega_filter: Optional[OmegaFilter] = None,
    ):
        self.log_prior = _log_prior(prior)
        if model is not None and model.n_params != self.log_prior.size:
            raise InvalidInputError(
                f"theta: prior has {self.log_prior.size} entries, model has {model.n_params}"
            )
        self.model = model
        self.spec = spec
        self.omega_filter = omega_filter or OmegaFilter()
        self.cum_loss = np.zeros_like(self.log_prior)
        self.alive = np.ones(self.log_prior.size, dtype=bool)
        self.n_observed = 0

    @property
    def size(self) -> int:
        return self.log_prior.size

    def restrict(self, x: Context, actions: Actions) -> None:
        if self.omega_filter.active:
            before = int(self.alive.sum())
            self.alive &= member_mask(self.model, x, actions, self.omega_filter.b)
            if self.alive.sum() < before:
                logger.debug("Omega_t filter: %d of %d members remain", self.alive.sum(), self.size)

    def observe(self, entry: HistoryEntry) -> None:
        if self.model is None or self.spec is None:
            raise UnsupportedOperationError("observe needs a value model and a loss spec")
        self.restrict(entry.context, entry.actions)
        self.observe_losses(member_losses(self.spec, self.model, entry))

    def observe_losses(self, losses) -> None:
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != self.cum_loss.shape:
            raise InvalidInputError(f"theta: loss vector has shape {losses.shape}, expected {self.cum_loss.shape}")
        self.cum_loss += losses
        self.n_observed += 1

    def log_weights(self) -> np.ndarray:
        log_w = np.where(self.alive, self.log_prior - self.cum_loss, -np.inf)
        return _normalize(log_w)

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights())

    def sample(self, rng: np.random.Generator) -> int:
        w = self.weights()
        return int(rng.choice(w.size, p=w / w.sum()))


# =========================================================
# Stochastic gradient Langevin dynamics
# =========================================================
def sgld_noise_scale(step_size: float, t: int) -> float:
    return math.sqrt(2.0 * step_size / t)


def sgld_round(
    particle: Vector,
    history: Sequence[HistoryEntry],
    spec: LossSpec,
    model: ValueModel,
    grad_log_prior: Callable[[Vector], Vector],
    rng: np.random.Generator,
    t: Optional[int] = None,
    step_size: float = STEP_SIZE,
    n_steps: Optional[int] = None,
) -> Vector:
    """Run one round of SGLD updates on the particle.

    Each update picks one stored observation uniformly and applies
    ``theta <- theta - step * (grad L_i - grad ln p0 / t) + sqrt(2 step / t) * eps``.
    ``t`` defaults to the number of observations and ``n_steps`` to ``t``.
    """
    if not history:
        raise InvalidInputError("history is empty; the first draw comes from the prior")
    t = len(history) if t is None else t
    if t < 1:
        raise InvalidInputError(f"round index t must be >= 1, got {t}")
    n_steps = t if n_steps is None else n_steps
    noise_scale = sgld_noise_scale(step_size, t)
    theta = np.array(particle, dtype=np.float64)
    for _ in range(n_steps):
        datum = history[int(rng.integers(len(history)))]
        grad = loss_gradient(spec, model, theta, datum) - grad_log_prior(theta) / t
        theta = theta - step_size * grad + noise_scale * rng.standard_normal(theta.shape)
    return theta


class SgldPosterior:
    """Single SGLD chain delivering one approximate posterior draw per round."""

    def __init__(
        self,
        model: ValueModel,
        spec: LossSpec,
        prior: GaussianPrior,
        step_size: float = STEP_SIZE,
        steps_per_round: Union[str, int] = "t",
    ):
        if not model.differentiable:
            raise UnsupportedOperationError(f"SGLD needs a differentiable model, got {model.kind.value}")
        if steps_per_round != "t" and not (isinstance(steps_per_round, int) and steps_per_round >= 1):
            raise InvalidInputError(f"steps_per_round must be 't' or a positive integer, got {steps_per_round!r}")
        self.model = model
        self.spec = spec
        self.prior = prior
        self.step_size = step_size
        self.steps_per_round = steps_per_round
        self.history: List[HistoryEntry] = []
        self.particle: Optional[Vector] = None

    def observe(self, entry: HistoryEntry) -> None:
        self.history.append(entry)

    def sample(self, rng: np.random.Generator) -> Vector:
        if not self.history:
            self.particle = self.prior.sample(rng)
            return self.particle.copy()
        if self.particle is None:
            self.particle = self.prior.sample(rng)
        n_steps = len(self.history) if self.steps_per_round == "t" else self.steps_per_round
        self.particle = sgld_round(
            self.particle,
            self.history,
            self.spec,
            self.model,
            self.prior.grad_log_density,
            rng,
            step_size=self.step_size,
            n_steps=n_steps,
        )
        return self.particle.copy()


PosteriorState = Union[DiscretePosterior, SgldPosterior]


def sample_posterior(state: PosteriorState, rng: np.random.Generator) -> Param:
    """Draw theta_t from the current posterior."""
    return state.sample(rng)
