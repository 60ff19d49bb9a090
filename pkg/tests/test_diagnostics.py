import math

import numpy as np
import pytest

from fgts.agents import AgentConfig, StepResult, run_bandit
from fgts.diagnostics import (
    DC_TOL,
    IDENTITY_TOL,
    MuParameter,
    appendix_b_identity_check,
    bayesian_regret_experiment,
    bellman_error,
    dc_estimate,
    delta_t_trace,
    finite_regret_bound,
    instantaneous_regret,
    log_partition_trace,
    mdp_dc_estimate,
    mdp_regret_decomposition_check,
    prop1_lower_bound,
    regret_decomposition,
    run_check_suite,
)
from fgts.environments import (
    RISKY_ARM,
    SAFE_ARM,
    counterexample_env,
    counterexample_mdp,
    optimal_q,
    random_finite_bandit,
    random_finite_mdp,
    random_linear_embed,
    random_q,
)
from fgts.errors import InvalidInputError
from fgts.models import HistoryEntry, LossSpec, TabularLinearEmbed


def test_instantaneous_regret(counterexample):
    env = counterexample.env
    assert instantaneous_regret(env, 0, SAFE_ARM) == 0.5
    assert instantaneous_regret(env, 0, RISKY_ARM) == 0.0


def test_decoy_decomposition(counterexample):
    env, model, _ = counterexample
    be, fg = regret_decomposition(model, 3, 0, env, [SAFE_ARM, RISKY_ARM], b=1.0)
    assert be == 0.0
    assert fg == -0.5
    assert be - fg == env.regret(0, SAFE_ARM)


def test_decomposition_identity_on_random_instances(rng):
    for _ in range(200):
        env, model = random_finite_bandit(int(rng.integers(1, 9)), int(rng.integers(1, 6)), rng)
        actions = env.action_set(0)
        theta = int(rng.integers(model.n_params))
        for b in (1.0, math.inf):
            be, fg = regret_decomposition(model, theta, 0, env, actions, b)
            regret = env.regret(0, model.best(theta, 0, actions)[0])
            assert abs(be - fg - regret) <= 1e-12


def test_regret_floor_values():
    assert prop1_lower_bound(1, 50) == 0.0
    assert prop1_lower_bound(2, 1) == 0.25
    assert prop1_lower_bound(20, 20) == pytest.approx(3.585, abs=1e-3)
    with pytest.raises(InvalidInputError):
        prop1_lower_bound(0, 5)


def test_finite_regret_bound():
    assert finite_regret_bound(1, 2, 100) == 0.0
    assert finite_regret_bound(20, 3, 100) == pytest.approx(4 * math.sqrt(5 * 100 * math.log(20)))
    with pytest.raises(InvalidInputError):
        finite_regret_bound(20, 3, 100, delta=0.1)
    assert finite_regret_bound(20, 3, 100, delta=0.1, delta_prime=0.1) > finite_regret_bound(20, 3, 100)


def test_realizable_point_mass_has_zero_bound(counterexample):
    env, model, _ = counterexample
    q = np.zeros(10)
    q[0] = 1.0
    report = dc_estimate(q, 0, model, env, b=1.0, claimed_K=2)
    assert report.lhs == 0.0
    assert report.lower_bound == 0.0
    assert not report.violated


def test_bad_q_rejected(counterexample):
    env, model, _ = counterexample
    with pytest.raises(InvalidInputError):
        dc_estimate(np.full(10, 0.2), 0, model, env)
    with pytest.raises(InvalidInputError):
        dc_estimate(np.ones(3) / 3, 0, model, env)
    with pytest.raises(InvalidInputError):
        MuParameter(np.array([0.0, 1.0]))


def test_finite_action_bound_sweep(rng):
    for _ in range(30):
        k = int(rng.integers(1, 6))
        env, model = random_finite_bandit(int(rng.integers(1, 9)), k, rng)
        for _ in range(10):
            q = rng.dirichlet(np.ones(model.n_params))
            report = dc_estimate(q, 0, model, env, float(rng.choice([1.0, math.inf])), claimed_K=k)
            assert report.lower_bound <= k + DC_TOL
            # mu * A + K / (4 mu) >= sqrt(K A) for every mu
            assert report.mu_bound >= math.sqrt(k * report.a_term) - 1e-12


def test_linear_embed_bound_uses_embedding_dim(rng):
    for _ in range(30):
        k = int(rng.integers(1, 4))
        env, model = random_linear_embed(int(rng.integers(2, 9)), k + 3, k, rng)
        for _ in range(10):
            report = dc_estimate(rng.dirichlet(np.ones(model.n_params)), 0, model, env, 1.0, claimed_K=k)
            assert report.lower_bound <= k + DC_TOL


def test_eigenbasis_identity_random(rng):
    for _ in range(30):
        env, model = random_linear_embed(5, 4, 3, rng)
        check = appendix_b_identity_check(rng.dirichlet(np.ones(5)), 0, model, env)
        assert check.gap <= IDENTITY_TOL
        assert 1 <= check.rank <= 3


def test_eigenbasis_identity_single_arm_point_mass(rng):
    env, model = random_linear_embed(1, 1, 2, rng)
    check = appendix_b_identity_check([1.0], 0, model, env)
    assert check.rank == 1
    assert check.gap <= IDENTITY_TOL


def test_eigenbasis_identity_at_true_weight(rng):
    env, model = random_linear_embed(4, 3, 2, rng)
    exact = TabularLinearEmbed(np.repeat(env.true_weight[None, None, :], 4, axis=0), model.phi_table)
    check = appendix_b_identity_check(np.full(4, 0.25), 0, exact, env)
    assert check.lhs == 0.0
    assert abs(check.rhs) <= IDENTITY_TOL


def test_eigenbasis_identity_needs_true_weight(counterexample):
    env, model, _ = counterexample
    with pytest.raises(InvalidInputError):
        appendix_b_identity_check(np.full(10, 0.1), 0, model, env)


def test_bellman_error_counterexample_mdp():
    spec, family, _ = counterexample_mdp(2, 10)
    for h in (1, 2):
        for x, a in spec.pairs(h):
            assert bellman_error(spec, family[0], h, x, a) == pytest.approx(0.0, abs=1e-12)
    decoy = family[4]
    assert bellman_error(spec, decoy, 1, "start", RISKY_ARM) == pytest.approx(-0.8)
    assert bellman_error(spec, decoy, 1, "start", SAFE_ARM) == pytest.approx(0.0, abs=1e-12)


def test_mdp_decomposition_on_counterexample():
    spec, family, _ = counterexample_mdp(3, 10)
    exact = mdp_regret_decomposition_check(spec, family[0], "start")
    assert exact.regret == 0.0
    assert exact.gap <= IDENTITY_TOL
    decoy = mdp_regret_decomposition_check(spec, family[6], "start")
    assert decoy.regret == pytest.approx(1.5)
    assert decoy.bellman_sum == pytest.approx(0.0, abs=1e-12)
    assert decoy.feelgood == pytest.approx(-1.5)
    assert decoy.gap <= IDENTITY_TOL


def test_mdp_decomposition_on_random_mdps(rng):
    for _ in range(50):
        spec = random_finite_mdp(3, 4, 3, rng)
        q_star = optimal_q(spec)
        f = random_q(spec, rng)
        for x1 in spec.initial_states:
            assert mdp_regret_decomposition_check(spec, f, x1, q_star).gap <= IDENTITY_TOL


def test_stagewise_bound_on_counterexample_mdp(rng):
    spec, family, _ = counterexample_mdp(3, 10)
    for h in (1, 2, 3):
        for _ in range(20):
            report = mdp_dc_estimate(rng.dirichlet(np.ones(10)), spec, family, "start", h)
            assert report.claimed_k == 2.0
            assert report.lower_bound <= report.claimed_k + DC_TOL


def test_log_partition_trace(counterexample, rng):
    env, model, prior = counterexample
    spec = LossSpec(eta=0.25, lam=0.3)
    history = [HistoryEntry(0, int(rng.integers(2)), float(rng.integers(2)), [0, 1]) for _ in range(12)]
    trace = log_partition_trace(history, spec, model, prior, env)
    assert trace.shape == (13,)
    assert trace[0] == 0.0
    point_mass = np.zeros(10)
    point_mass[0] = 1.0
    np.testing.assert_array_equal(log_partition_trace(history, spec, model, point_mass, env), np.zeros(13))


def test_delta_t_trace_requires_weights(counterexample):
    _, model, _ = counterexample
    steps = [StepResult(1, 0, SAFE_ARM, 1.0, 0.5)]
    with pytest.raises(InvalidInputError):
        delta_t_trace(steps, model, 0)


def test_delta_t_trace_accumulates(counterexample, rng):
    steps = []
    run_bandit(counterexample, AgentConfig(LossSpec(b=1.0)), 20, rng, on_step=steps.append, track_weights=True)
    trace = delta_t_trace(steps, counterexample.model, 0)
    assert trace.shape == (20,)
    assert np.all(np.diff(trace) >= 0)
    assert trace[0] >= 0


def test_bayesian_regret_experiment(rng):
    instance = counterexample_env(5)
    result = bayesian_regret_experiment(instance, AgentConfig(LossSpec(b=1.0)), 15, 4, rng)
    assert result.mean.shape == (15,)
    assert np.all(result.mean >= 0)
    assert np.all(np.diff(result.mean) >= 0)
    assert np.all(np.diff(result.frequentist_mean) >= 0)
    assert set(result.slices) <= set(range(5))
    assert result.delta_t.shape == (15,)
    assert [run[0].run_id for run in result.records] == ["bayes-0", "bayes-1", "bayes-2", "bayes-3"]
    np.testing.assert_allclose(np.mean([[rec.cum_regret for rec in run] for run in result.records], axis=0), result.mean)
    with pytest.raises(InvalidInputError):
        bayesian_regret_experiment(instance, AgentConfig(), 15, 0, rng)


@pytest.mark.slow
def test_bayesian_regret_stays_small_while_fixed_theta_grows():
    T = 200
    result = bayesian_regret_experiment(
        counterexample_env(20), AgentConfig(LossSpec(eta=0.25, b=1.0)), T, 100, np.random.default_rng(0)
    )
    assert len(result.records) == 100
    assert result.mean[-1] < 0.25 * T
    assert result.frequentist_mean[-1] > 0.25 * T
    assert result.frequentist_mean[-1] - 3 * result.frequentist_se[-1] > result.mean[-1] + 3 * result.se[-1]


@pytest.mark.slow
def test_quick_check_suite_passes():
    results = run_check_suite(np.random.default_rng(0), "quick")
    assert [r.name for r in results if not r.passed] == []
    assert len(results) == 7


def test_check_suite_unknown_scale(rng):
    with pytest.raises(InvalidInputError):
        run_check_suite(rng, "huge")
