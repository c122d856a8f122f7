"""
Model-based plug-in learner.

Draws the same number of generative samples for every retained (s, a)
pair, builds the empirical MDP restricted to the retained actions and
returns the greedy policy of exact planning on it.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from agents.base import Learner
from app.models.configs import LearnerConfig
from app.models.mdp import CandidateSets, Mdp, Policy
from app.services.planning import value_iteration
from app.services.sampling import GenerativeModel
from app.utils.errors import SampleBudgetError
from config.settings import get_settings


def samples_per_pair(action_sets: CandidateSets, gamma: float, cfg: LearnerConfig) -> int:
    """
    Per-pair budget n = ceil(scale * log(2 N / δ) / ((1-γ)^3 ε^2)), with N
    the number of retained pairs, unless ``cfg.samples_per_pair`` fixes it.

    Raises:
        SampleBudgetError: If the budget is zero
    """
    if cfg.samples_per_pair is not None:
        n = cfg.samples_per_pair
    else:
        n_pairs = action_sets.full_count
        n = math.ceil(
            cfg.budget_scale * math.log(2.0 * n_pairs / cfg.delta)
            / ((1.0 - gamma) ** 3 * cfg.eps ** 2)
        )
    if n < 1:
        raise SampleBudgetError("zero budget: the learner needs at least one sample per pair")
    return int(n)


class EmpiricalModelLearner(Learner):
    """
    Plug-in planner on the empirical model, used as the near-optimal
    learner inside the transfer pipeline.
    """

    def __init__(self, **kwargs):
        super().__init__(
            name="Empirical Model Learner",
            learner_id="empirical_model",
            description="Uniform generative sampling over retained pairs, then exact planning on the empirical MDP",
        )

    def fit(self, gm: GenerativeModel, action_sets: CandidateSets, n: int, workers: int = 1) -> Mdp:
        """
        Estimate the MDP restricted to ``action_sets`` from n samples per pair.

        Args:
            gm: Generative model of the unknown MDP
            action_sets: Retained actions per state
            n: Samples per retained pair
            workers: Threads used to sample distinct pairs concurrently

        Returns:
            The empirical MDP
        """
        if len(action_sets.sets) != gm.n_states:
            raise SampleBudgetError(
                f"action sets cover {len(action_sets.sets)} states, oracle has {gm.n_states}"
            )
        if any(len(acts) == 0 for acts in action_sets.sets):
            raise SampleBudgetError("empty action set")
        pairs = [(s, a) for s, acts in enumerate(action_sets.sets) for a in acts]
        transition = np.zeros((gm.n_states, gm.n_actions, gm.n_states))
        reward = np.zeros_like(transition)

        def draw(pair):
            return pair, gm.sample_many(pair[0], pair[1], n)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(draw, pairs))
        else:
            results = [draw(pair) for pair in pairs]

        for (s, a), (next_states, rewards) in results:
            transition[s, a] = np.bincount(next_states, minlength=gm.n_states) / n
            # rewards are a deterministic function of (s, a, s')
            reward[s, a, next_states] = rewards

        self.logger.debug(f"fitted empirical model from {n} samples on each of {len(pairs)} pairs")
        return Mdp(
            transition=transition,
            reward=reward,
            gamma=gm.gamma,
            actions_per_state=action_sets.sets,
        )

    def learn(self, gm: GenerativeModel, action_sets: CandidateSets, cfg: LearnerConfig) -> Policy:
        n = samples_per_pair(action_sets, gm.gamma, cfg)
        model = self.fit(gm, action_sets, n, workers=cfg.workers)
        _, _, policy = value_iteration(model, tol=get_settings().planning_tol)
        self.logger.info(
            f"learned policy from {n * action_sets.full_count} samples "
            f"({n} per pair over {action_sets.full_count} pairs)"
        )
        return policy


def full_action_sets(gm: GenerativeModel) -> CandidateSets:
    """Candidate sets that keep every available action"""
    return CandidateSets(
        threshold=float("inf"),
        sets=gm.actions_per_state,
        s_prime=gm.s_prime,
    )


def empirical_model_learner(gm: GenerativeModel, action_sets: CandidateSets, cfg: LearnerConfig) -> Policy:
    return EmpiricalModelLearner().learn(gm, action_sets, cfg)


def learn_from_scratch(gm: GenerativeModel, cfg: LearnerConfig, learner: Optional[EmpiricalModelLearner] = None) -> Policy:
    """The same plug-in learner with no action eliminated"""
    learner = learner or EmpiricalModelLearner()
    return learner.learn(gm, full_action_sets(gm), cfg)
