"""Seeded experiment execution.

Each (lambda index, run) pair gets its own generator built from
``SeedSequence(seed, spawn_key=(lambda_index, run))``, so curves for
different lambdas draw from disjoint streams and results do not depend on
the worker count or scheduling order. Bayes mode hands each lambda one
generator, ``SeedSequence(seed, spawn_key=(lambda_index,))``, to
``bayesian_regret_experiment``.
"""
import logging
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from fgts.agents import run_bandit, run_mdp
from fgts.diagnostics import BayesianRegret, bayesian_regret_experiment
from fgts.environments import counterexample_env, counterexample_mdp, linear_env_paper
from fgts.schemas import ArmSet, EnvKind, ExperimentConfig, Mode
from fgts.storage import AGGREGATE_COLUMNS, RAW_COLUMNS

logger = logging.getLogger(__name__)


class ExperimentResult(NamedTuple):
    config: ExperimentConfig
    raw: pd.DataFrame
    aggregate: pd.DataFrame
    bayes: Optional[Dict[float, BayesianRegret]] = None


def build_instance(config: ExperimentConfig):
    env = config.env
    if env.kind == EnvKind.counterexample:
        return counterexample_env(env.n_models)
    if env.kind == EnvKind.counterexample_mdp:
        return counterexample_mdp(env.horizon, env.n_models)
    return linear_env_paper(
        dim=env.dim,
        n_arms=None if env.arm_set == ArmSet.sphere else env.n_arms,
        radius=env.radius,
        noise_half_width=env.noise_half_width,
        prior_precision=config.agent.prior_precision,
        seed=env.arm_seed,
    )


def run_generator(config: ExperimentConfig, lam_index: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(lam_index, run)))


def bayes_generator(config: ExperimentConfig, lam_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(lam_index,)))


def _run_one(config: ExperimentConfig, lam_index: int, lam: float, run: int) -> List[dict]:
    rng = run_generator(config, lam_index, run)
    agent = config.agent_config(lam)
    run_id = f"lam{lam_index}-run{run}"
    if config.mode == Mode.mdp:
        spec, family, prior = build_instance(config)
        records = run_mdp(spec, family, prior, agent, config.T, rng, run_id)
    else:
        records = run_bandit(build_instance(config), agent, config.T, rng, run_id)
    return [r.to_row() for r in records]


def _run_bayes(config: ExperimentConfig, lam_index: int, lam: float) -> BayesianRegret:
    return bayesian_regret_experiment(
        build_instance(config),
        config.agent_config(lam),
        config.T,
        config.runs,
        bayes_generator(config, lam_index),
        run_prefix=f"lam{lam_index}-run",
    )


def aggregate(raw: pd.DataFrame) -> pd.DataFrame:
    """Mean cumulative regret and its standard error per (lambda, t)."""
    grouped = raw.groupby(["lambda", "t"], sort=True)["cum_regret"]
    out = grouped.agg(mean_cum_regret="mean", sd="std", runs="count").reset_index()
    if (out["runs"] < 2).any():
        logger.warning("⚠️ single run per curve: standard errors reported as 0")
    out["se"] = (out["sd"] / np.sqrt(out["runs"])).fillna(0.0)
    return out[AGGREGATE_COLUMNS].sort_values(["lambda", "t"], kind="stable").reset_index(drop=True)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    lambdas = config.agent.lambdas
    logger.info(
        "🚀 %s: mode=%s, %d lambda(s) x %d run(s), T=%d",
        config.name, config.mode.value, len(lambdas), config.runs, config.T,
    )
    bayes = None
    if config.mode == Mode.bayes:
        outcomes = Parallel(n_jobs=config.n_jobs)(delayed(_run_bayes)(config, i, lam) for i, lam in enumerate(lambdas))
        bayes = dict(zip(lambdas, outcomes))
        rows = [[rec.to_row() for rec in run] for out in outcomes for run in out.records]
    else:
        tasks = [(i, lam, r) for i, lam in enumerate(lambdas) for r in range(config.runs)]
        rows = Parallel(n_jobs=config.n_jobs)(delayed(_run_one)(config, i, lam, r) for i, lam, r in tasks)
    raw = pd.DataFrame([row for chunk in rows for row in chunk], columns=RAW_COLUMNS)
    agg = aggregate(raw)
    for lam, final in agg.groupby("lambda").tail(1).set_index("lambda")["mean_cum_regret"].items():
        logger.info("✅ lambda=%g final mean cumulative regret %.4f", lam, final)
    return ExperimentResult(config, raw, agg, bayes)


def final_summary(result: ExperimentResult) -> pd.DataFrame:
    return result.aggregate.groupby("lambda").tail(1).reset_index(drop=True)
