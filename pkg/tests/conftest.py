import numpy as np
import pytest

from app.models.configs import HardCaseParams
from app.models.mdp import Mdp
from app.services.instances import random_mdp
from config.settings import get_settings


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Keep environment overrides from leaking between tests"""
    for name in (
        "TRANSFER_MDP_OUTPUT_DIR",
        "TRANSFER_MDP_WORKERS",
        "TRANSFER_MDP_DEBUG_TRANSCRIPTS",
        "TRANSFER_MDP_PLANNING_TOL",
        "TRANSFER_MDP_CORS_ORIGINS",
    ):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def two_state_mdp():
    """
    State 0 chooses between a rewarding self-loop (action 0) and a move to
    the absorbing state 1 (action 1). V* = (10, 0) at γ = 0.9.
    """
    transition = np.zeros((2, 2, 2))
    reward = np.zeros_like(transition)
    transition[0, 0, 0] = 1.0
    reward[0, 0, 0] = 1.0
    transition[0, 1, 1] = 1.0
    transition[1, 0, 1] = 1.0
    return Mdp(transition=transition, reward=reward, gamma=0.9, actions_per_state=((0, 1), (0,)))


@pytest.fixture
def two_state_document():
    return {
        "gamma": 0.9,
        "states": 2,
        "actions": [[0, 1], [0]],
        "transitions": {"0,0": [1.0, 0.0], "0,1": [0.0, 1.0], "1,0": [0.0, 1.0]},
        "rewards": {"0,0,0": 1.0},
    }


@pytest.fixture
def random_prior():
    return random_mdp(5, 3, 0.9, seed=0)


@pytest.fixture
def example_params():
    return HardCaseParams(beta=0.2, gamma=0.9, eps=0.01, p0=[[0.97, 0.9, 0.87, 0.7]])
