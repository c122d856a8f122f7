"""
Seeded instance generators for tests and experiments.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from app.models.mdp import Mdp
from app.services.convexhull import MixCoefficients, mix_bases
from app.services.planning import perturb_within_ball

logger = logging.getLogger("instances")


def dirichlet(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.dirichlet(np.ones(size))


def random_mdp(
    n_states: int,
    n_actions: int,
    gamma: float,
    seed: int,
    branching: Optional[int] = None,
    variable_actions: bool = False,
) -> Mdp:
    """
    Garnet-style random MDP.

    Every pair connects to ``branching`` next states chosen uniformly,
    with Dirichlet(1) weights; rewards r(s, a, s') are uniform on [0, 1].
    With ``variable_actions`` each state keeps a random nonempty prefix of
    the actions.
    """
    rng = np.random.default_rng(seed)
    b = n_states if branching is None else min(branching, n_states)
    transition = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            connected = rng.choice(n_states, size=b, replace=False)
            transition[s, a, connected] = dirichlet(rng, b)
    reward = rng.uniform(0.0, 1.0, size=transition.shape)
    if variable_actions:
        actions = [tuple(range(int(rng.integers(1, n_actions + 1)))) for _ in range(n_states)]
    else:
        actions = [tuple(range(n_actions))] * n_states
    return Mdp(transition=transition, reward=reward, gamma=gamma, actions_per_state=tuple(actions))


def _shared_rows_mdp(action_rewards: np.ndarray, n_states: int, gamma: float, seed: int) -> Mdp:
    """All actions of a state share one random transition row; reward depends on the action only"""
    rng = np.random.default_rng(seed)
    n_actions = len(action_rewards)
    transition = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        transition[s, :, :] = dirichlet(rng, n_states)
    reward = np.broadcast_to(action_rewards[None, :, None], transition.shape).copy()
    actions = tuple(tuple(range(n_actions)) for _ in range(n_states))
    return Mdp(transition=transition, reward=reward, gamma=gamma, actions_per_state=actions)


def elimination_instance(n_states: int = 6, n_actions: int = 8, gamma: float = 0.9, seed: int = 0) -> Mdp:
    """
    Prior where the first half of the actions are near-optimal (rewards
    1, 0.95, 0.9, ...) and the second half earn nothing, so a unit value
    gap separates them at every state.
    """
    good = n_actions // 2
    rewards = np.zeros(n_actions)
    rewards[:good] = 1.0 - 0.05 * np.arange(good)
    return _shared_rows_mdp(rewards, n_states, gamma, seed)


def single_reward_instance(n_states: int = 6, n_actions: int = 4, gamma: float = 0.9, seed: int = 0) -> Mdp:
    """Prior with a single rewarding action, so small balls leave one candidate per state"""
    rewards = np.zeros(n_actions)
    rewards[0] = 1.0
    return _shared_rows_mdp(rewards, n_states, gamma, seed)


def uniform_reward_instance(n_states: int = 6, n_actions: int = 4, gamma: float = 0.9, seed: int = 0) -> Mdp:
    """Prior whose actions are indistinguishable, so every action stays a candidate"""
    return _shared_rows_mdp(np.full(n_actions, 0.5), n_states, gamma, seed)


INSTANCE_BUILDERS = {
    "random": random_mdp,
    "elimination": elimination_instance,
    "single-reward": single_reward_instance,
    "uniform-reward": uniform_reward_instance,
}


def prior_truth_pair(kind: str, beta: float, seed: int, **kwargs) -> Tuple[Mdp, Mdp]:
    """
    A prior built by ``kind`` (from ``seed``) and a truth drawn inside its
    TV ball of radius beta.
    """
    builder = INSTANCE_BUILDERS.get(kind)
    if builder is None:
        raise ValueError(f"Unknown instance kind: {kind}")
    prior = builder(seed=seed, **kwargs)
    truth = perturb_within_ball(prior, beta, rng_seed=seed + 1)
    return prior, truth


def random_hull(
    K: int,
    n_states: int,
    n_actions: int,
    gamma: float,
    seed: int,
) -> List[Mdp]:
    """K independent random base models sharing structure"""
    seeds = np.random.SeedSequence(seed).generate_state(K)
    return [random_mdp(n_states, n_actions, gamma, int(s)) for s in seeds]


def random_simplex_point(K: int, seed: int) -> MixCoefficients:
    rng = np.random.default_rng(seed)
    values = dirichlet(rng, K)
    return MixCoefficients(values=values / values.sum())


def hull_target(bases: List[Mdp], coefficients: MixCoefficients) -> Mdp:
    """The unknown model of the convex-hull setting"""
    return mix_bases(bases, coefficients)
