import math

import numpy as np
import pytest

from fgts.environments import (
    RISKY_ARM,
    SAFE_ARM,
    ContextSchedule,
    MdpSpec,
    NoiseKind,
    QFunction,
    RewardNoise,
    counterexample_env,
    counterexample_mdp,
    episode_regret,
    linear_env_paper,
    mdp_rollout,
    optimal_q,
    random_finite_mdp,
    sample_reward,
)
from fgts.errors import InvalidEnvError, InvalidInputError
from fgts.models import SphereArms, greedy_action


def test_counterexample_values():
    env, model, prior = counterexample_env(10)
    assert model.value(4, 0, RISKY_ARM) == pytest.approx(0.2)
    for j in range(10):
        assert model.value(j, 0, SAFE_ARM) == 0.5
    assert env.true_mean(0, RISKY_ARM) == 1.0
    assert env.optimal_value(0) == 1.0
    np.testing.assert_allclose(prior, np.full(10, 0.1))


def test_counterexample_singleton_and_invalid():
    _, model, prior = counterexample_env(1)
    assert model.n_params == 1
    assert list(prior) == [1.0]
    with pytest.raises(InvalidInputError):
        counterexample_env(0)


def test_theory_envs_bounded():
    env, _, _ = counterexample_env(7)
    for a in env.action_set(0):
        assert 0.0 <= env.true_mean(0, a) <= 1.0
    assert env.theory_regime


def test_reward_means_converge():
    env, _, _ = counterexample_env(5)
    rng = np.random.default_rng(0)
    for a in (SAFE_ARM, RISKY_ARM):
        draws = np.array([sample_reward(env, 0, a, rng) for _ in range(100_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - env.true_mean(0, a)) <= 3 * se + 1e-12


def test_noiseless_reward_is_exact():
    noise = RewardNoise(NoiseKind.none)
    assert noise.sample(0.37, np.random.default_rng(0)) == 0.37


def test_invalid_action_rejected(counterexample):
    with pytest.raises(InvalidInputError):
        sample_reward(counterexample.env, 0, 2, np.random.default_rng(0))


def test_linear_env_arms_and_noise():
    env, model, prior = linear_env_paper()
    arms = env.action_set(0)
    assert arms.shape == (51, 100)
    assert env.true_mean(0, arms[0]) == 1.0
    np.testing.assert_allclose(np.linalg.norm(arms[1:, 1:], axis=1), 0.2)
    assert np.all(arms[1:, 0] == 0.0)
    for arm in arms[1:]:
        assert env.true_mean(0, arm) <= 0.2 + 1e-12
    rng = np.random.default_rng(3)
    for arm in arms[:5]:
        mean = env.true_mean(0, arm)
        draws = [sample_reward(env, 0, arm, rng) for _ in range(200)]
        assert all(mean - 0.5 <= r <= mean + 0.5 for r in draws)
    assert prior.precision == 100.0
    assert not env.theory_regime


def test_linear_env_sphere_option():
    env, model, _ = linear_env_paper(dim=5, n_arms=None)
    arms = env.action_set(0)
    assert isinstance(arms, SphereArms)
    assert env.optimal_value(0) == 1.0
    np.testing.assert_array_equal(env.optimal_action(0), np.eye(5)[0])


def test_linear_env_seeded():
    a = linear_env_paper(dim=8, n_arms=4, seed=11).env.action_set(0)
    b = linear_env_paper(dim=8, n_arms=4, seed=11).env.action_set(0)
    np.testing.assert_array_equal(a, b)


def test_context_schedule_cycles(rng):
    schedule = ContextSchedule.fixed(3, 4)
    assert [schedule.next(t, [], rng) for t in range(1, 6)] == [3, 4, 3, 4, 3]
    adversarial = ContextSchedule(adversary=lambda history: len(history))
    assert adversarial.next(1, [None, None], rng) == 2
    with pytest.raises(InvalidInputError):
        ContextSchedule()


def test_counterexample_mdp_family():
    spec, family, prior = counterexample_mdp(3, 10)
    assert len(family) == 10
    np.testing.assert_allclose(prior, 0.1)
    q_star = optimal_q(spec)
    assert family[0].table == q_star.table
    assert q_star.state_value(spec, 1, "start") == 3.0


def test_decoy_follows_safe_chain():
    spec, family, _ = counterexample_mdp(3, 10)
    steps = mdp_rollout(spec, family[5], "start", np.random.default_rng(0))
    assert [s.state for s in steps] == ["start", "safe", "safe"]
    assert steps[0].action == SAFE_ARM


def test_one_stage_mdp_matches_bandit():
    spec, family, _ = counterexample_mdp(1, 10)
    _, model, _ = counterexample_env(10)
    for j, f in enumerate(family.members):
        assert f.greedy(spec, 1, "start")[0] == greedy_action(model, j, 0, [SAFE_ARM, RISKY_ARM])
        for a in (SAFE_ARM, RISKY_ARM):
            assert f.value(1, "start", a) == pytest.approx(model.value(j, 0, a))


def test_rollout_one_stage():
    spec, family, _ = counterexample_mdp(1, 4)
    steps = mdp_rollout(spec, family[0], "start", np.random.default_rng(0))
    assert len(steps) == 1
    assert steps[0].action == RISKY_ARM
    assert steps[0].next_state is None


def test_optimal_greedy_collects_value(rng):
    spec = random_finite_mdp(3, 4, 3, rng)
    q_star = optimal_q(spec)
    for x1 in spec.initial_states:
        steps = mdp_rollout(spec, q_star, x1, rng)
        assert sum(s.reward for s in steps) == pytest.approx(q_star.state_value(spec, 1, x1))
        assert episode_regret(spec, q_star, x1, steps) == pytest.approx(0.0, abs=1e-12)


def test_transitions_deterministic(rng):
    spec = random_finite_mdp(3, 4, 3, rng)
    for h in (1, 2):
        for x, a in spec.pairs(h):
            assert spec.next_state(h, x, a) == spec.next_state(h, x, a)
            assert spec.next_state(h, x, a) in spec.states[h + 1]


def test_state_without_actions():
    spec = MdpSpec(horizon=1, states={1: ("s",)}, valid_actions={}, transitions={}, mean_rewards={}, initial_states=("s",))
    f = QFunction("empty", {}, 1)
    with pytest.raises(InvalidEnvError):
        mdp_rollout(spec, f, "s", np.random.default_rng(0))
    with pytest.raises(InvalidEnvError):
        spec.actions(2, "s")
