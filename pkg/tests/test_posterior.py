import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fgts.environments import SAFE_ARM, random_finite_bandit
from fgts.errors import EmptyPosteriorError, InvalidInputError
from fgts.models import HistoryEntry, LossSpec, PureLinear, TabularFinite
from fgts.posterior import (
    DiscretePosterior,
    GaussianPrior,
    OmegaFilter,
    SgldPosterior,
    discrete_posterior_weights,
    omega_filter_pass,
    sample_posterior,
    sgld_noise_scale,
    sgld_round,
)


class ZeroRng:
    def integers(self, n):
        return 0

    def standard_normal(self, shape=None):
        return np.zeros(shape)


def test_empty_history_returns_prior():
    prior = np.array([0.1, 0.2, 0.3, 0.4])
    model = TabularFinite(np.zeros((4, 1, 2)))
    np.testing.assert_allclose(discrete_posterior_weights([], LossSpec(), model, prior), prior, rtol=1e-14)


def test_safe_only_history_stays_uniform(counterexample):
    env, model, prior = counterexample
    rng = np.random.default_rng(0)
    history = [HistoryEntry(0, SAFE_ARM, float(rng.integers(2)), [0, 1]) for _ in range(50)]
    weights = discrete_posterior_weights(history, LossSpec(eta=0.25), model, prior)
    assert np.all(weights == weights[0])
    np.testing.assert_allclose(weights, prior, rtol=1e-14)


def test_two_member_hand_ratio():
    model = TabularFinite([[[0.2]], [[0.7]]])
    history = [HistoryEntry(0, 0, 0.5, [0])]
    w = discrete_posterior_weights(history, LossSpec(eta=1.0), model, [0.5, 0.5])
    assert w[1] / w[0] == pytest.approx(math.exp(0.09 - 0.04))
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_omega_filter_pass():
    model = TabularFinite([[[0.3, -2.0]], [[0.5, 0.1]]])
    assert omega_filter_pass(0, model, [0], [[0, 1]], math.inf)
    assert not omega_filter_pass(0, model, [0], [[0, 1]], 1.0)
    assert omega_filter_pass(1, model, [0], [[0, 1]], 1.0)
    assert omega_filter_pass(0, model, [], [], 1.0)
    with pytest.raises(InvalidInputError):
        omega_filter_pass(0, model, [0], [], 1.0)


def test_filtered_members_get_zero_weight():
    model = TabularFinite([[[0.3, -2.0]], [[0.5, 0.1]], [[0.9, -0.5]]])
    post = DiscretePosterior(np.full(3, 1 / 3), model, LossSpec(lam=0.5, b=1.0), OmegaFilter(1.0, True))
    post.observe(HistoryEntry(0, 0, 1.0, [0, 1]))
    w = post.weights()
    assert w[0] == 0.0
    assert w[1] > 0 and w[2] > 0
    alive_before = post.alive.copy()
    post.observe(HistoryEntry(0, 1, 0.0, [0, 1]))
    assert np.all(post.alive <= alive_before)


def test_everything_filtered_raises():
    model = TabularFinite([[[-3.0]], [[-2.0]]])
    post = DiscretePosterior([0.5, 0.5], model, LossSpec(b=1.0), OmegaFilter(1.0, True))
    post.observe(HistoryEntry(0, 0, 0.0, [0]))
    with pytest.raises(EmptyPosteriorError):
        post.weights()


def test_incremental_matches_recomputation():
    rng = np.random.default_rng(5)
    env, model = random_finite_bandit(6, 4, rng)
    spec = LossSpec(eta=0.5, lam=0.3, b=1.0)
    prior = rng.dirichlet(np.ones(6))
    post = DiscretePosterior(prior, model, spec)
    history = []
    for _ in range(50):
        entry = HistoryEntry(0, int(rng.integers(4)), float(rng.uniform()), [0, 1, 2, 3])
        history.append(entry)
        post.observe(entry)
    scratch = np.log(discrete_posterior_weights(history, spec, model, prior))
    np.testing.assert_allclose(post.log_weights(), scratch, atol=1e-10)


@given(shift=st.floats(min_value=-50, max_value=50))
def test_common_loss_shift_leaves_weights(shift):
    post = DiscretePosterior([0.2, 0.3, 0.5])
    post.observe_losses([0.4, 1.1, 2.0])
    before = post.weights()
    post.observe_losses(np.full(3, shift))
    np.testing.assert_allclose(post.weights(), before, rtol=1e-12, atol=1e-15)


def test_point_mass_sampling():
    post = DiscretePosterior([0.0, 0.0, 1.0, 0.0])
    rng = np.random.default_rng(1)
    assert {sample_posterior(post, rng) for _ in range(100)} == {2}


def test_uniform_sampling_frequencies():
    n, draws = 5, 100_000
    post = DiscretePosterior(np.full(n, 1 / n))
    rng = np.random.default_rng(2)
    counts = np.bincount([post.sample(rng) for _ in range(draws)], minlength=n)
    se = math.sqrt(draws * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - draws / n) <= 4 * se)


def _zero_gradient_setup(dim):
    model = PureLinear(dim)
    arms = np.zeros((1, dim))
    history = [HistoryEntry(0, arms[0], 0.0, arms)] * 4
    return model, history


def test_sgld_fixed_point_without_noise():
    model, history = _zero_gradient_setup(3)
    prior = GaussianPrior(100.0, 3)
    theta = sgld_round(np.zeros(3), history, LossSpec(eta=1.0), model, prior.grad_log_density, ZeroRng())
    np.testing.assert_array_equal(theta, np.zeros(3))


def test_sgld_noise_scale():
    dim = 100_000
    model, history = _zero_gradient_setup(dim)
    prior = GaussianPrior(100.0, dim)
    theta = sgld_round(
        np.zeros(dim), history, LossSpec(eta=1.0), model, prior.grad_log_density,
        np.random.default_rng(4), t=4, n_steps=1,
    )
    expected = sgld_noise_scale(0.01, 4)
    assert expected == pytest.approx(math.sqrt(0.005))
    assert abs(theta.std() / expected - 1.0) < 0.02


def test_sgld_single_update_by_hand():
    model = PureLinear(2)
    arms = np.eye(2)
    history = [HistoryEntry(0, arms[0], 1.0, arms)]
    prior = GaussianPrior(100.0, 2)
    theta = sgld_round(np.array([0.5, 0.0]), history, LossSpec(eta=1.0), model, prior.grad_log_density, np.random.default_rng(3))
    ref = np.random.default_rng(3)
    ref.integers(1)
    eps = ref.standard_normal(2)
    # grad L = 2 (0.5 - 1) e1 = -e1; prior term -(-100 * 0.5) e1 = 50 e1
    np.testing.assert_allclose(theta, np.array([0.5 - 0.01 * 49.0, 0.0]) + math.sqrt(0.02) * eps)


def test_sgld_empty_history_rejected():
    model = PureLinear(2)
    with pytest.raises(InvalidInputError):
        sgld_round(np.zeros(2), [], LossSpec(), model, lambda th: -th, np.random.default_rng(0))


def test_sgld_posterior_replays(small_linear):
    env, model, prior = small_linear
    arms = env.action_set(0)

    def particles(seed):
        rng = np.random.default_rng(seed)
        post = SgldPosterior(model, LossSpec(eta=1.0, lam=0.1), prior)
        out = [post.sample(rng)]
        for k in range(5):
            post.observe(HistoryEntry(0, arms[k % len(arms)], 0.3, arms))
            out.append(post.sample(rng))
        return np.stack(out)

    np.testing.assert_array_equal(particles(9), particles(9))
