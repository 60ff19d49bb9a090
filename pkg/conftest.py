import numpy as np
import pytest

from fgts.environments import counterexample_env, linear_env_paper


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def counterexample():
    return counterexample_env(10)


@pytest.fixture
def small_linear():
    return linear_env_paper(dim=6, n_arms=5, seed=1)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FGTS_OUTPUT_DIR", str(tmp_path))
    return tmp_path
