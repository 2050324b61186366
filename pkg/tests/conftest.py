"""
Shared fixtures: small models, configs and isolated settings
"""

import numpy as np
import pytest

from linucb_lab.config import settings
from linucb_lab.schemas.experiment import ExperimentConfig
from linucb_lab.services.linmdp import make_hard_instance, make_random_linear_mdp, make_tabular_embedding


@pytest.fixture(autouse=True)
def isolated_settings(mocker, tmp_path):
    """Keep tests independent of the environment's .env and outputs"""
    mocker.patch.object(settings, "LINUCB_LAB_THREADS", None)
    mocker.patch.object(settings, "RECORD_WALLCLOCK", False)
    mocker.patch.object(settings, "SWEEP_BACKEND", "local")
    mocker.patch.object(settings, "OUTPUT_DIR", str(tmp_path / "results"))
    return settings


@pytest.fixture
def hard_mdp():
    # d_minus=3 -> feature dimension 5, 8 actions, 6 states
    return make_hard_instance(3, 4, 200, np.random.default_rng(0))


@pytest.fixture
def random_mdp():
    return make_random_linear_mdp(3, 4, 5, 3, np.random.default_rng(1))


@pytest.fixture
def chain_mdp():
    """Two states, two actions, H=2: action 1 moves to the rewarding state 1"""
    H, S, A = 2, 2, 2
    p = np.zeros((H, S, A, S))
    p[:, :, 0, 0] = 1.0
    p[:, :, 1, 1] = 1.0
    r = np.zeros((H, S, A))
    r[:, 1, :] = 1.0
    return make_tabular_embedding(p, r)


@pytest.fixture
def make_config():
    def _make(agent="oracle", K=10, seeds=(0,), env=None, **agent_kwargs):
        return ExperimentConfig.model_validate({
            "version": 1,
            "env": env or {"kind": "hard", "d": 3, "H": 2, "mu_mode": "all_plus"},
            "agent": {"name": agent, **agent_kwargs},
            "K": K,
            "seeds": list(seeds),
        })
    return _make
