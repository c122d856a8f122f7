import math

import numpy as np
import pytest

from agents.empirical_model import (EmpiricalModelLearner, empirical_model_learner,
                                    full_action_sets, learn_from_scratch,
                                    samples_per_pair)
from agents.q_learning import QLearningAgent, default_schedule, q_learning
from agents.selector import LEARNER_CREATORS, get_learner, list_learners
from app.models.configs import LearnerConfig, SailingInstance
from app.models.mdp import CandidateSets, Mdp, QFunction
from app.services.instances import random_mdp
from app.services.planning import is_eps_optimal, value_iteration
from app.services.sailing import make_sailing
from app.services.sampling import GenerativeModel
from app.utils.errors import SampleBudgetError


class TestSamplesPerPair:
    def test_formula(self, two_state_mdp):
        sets = full_action_sets(GenerativeModel(two_state_mdp))
        cfg = LearnerConfig(eps=0.5, delta=0.1, budget_scale=0.01)
        expected = math.ceil(0.01 * math.log(2 * 3 / 0.1) / ((1.0 - 0.9) ** 3 * 0.5 ** 2))
        assert samples_per_pair(sets, 0.9, cfg) == expected

    def test_fixed_budget(self, two_state_mdp):
        sets = full_action_sets(GenerativeModel(two_state_mdp))
        assert samples_per_pair(sets, 0.9, LearnerConfig(eps=0.5, samples_per_pair=17)) == 17

    def test_zero_budget(self, two_state_mdp):
        sets = full_action_sets(GenerativeModel(two_state_mdp))
        with pytest.raises(SampleBudgetError, match="zero budget"):
            samples_per_pair(sets, 0.9, LearnerConfig(eps=0.5, samples_per_pair=0))


class TestEmpiricalModelLearner:
    def test_fit_is_exact_on_deterministic_model(self, two_state_mdp):
        gm = GenerativeModel(two_state_mdp, seed=0)
        model = EmpiricalModelLearner().fit(gm, full_action_sets(gm), 5)
        assert np.allclose(model.transition, two_state_mdp.transition)
        assert np.allclose(model.reward, two_state_mdp.reward)
        assert gm.total_samples == 15

    def test_fit_samples_only_retained_pairs(self, random_prior):
        gm = GenerativeModel(random_prior, seed=0)
        sets = CandidateSets(threshold=1.0, sets=((0,), (1, 2), (0,), (0,), (2,)), s_prime=(0, 1, 2, 3, 4))
        model = EmpiricalModelLearner().fit(gm, sets, 10, workers=3)
        counts = gm.report().counts
        assert counts.sum() == 60
        assert counts[0, 1] == 0 and counts[1, 1] == 10
        assert model.actions_per_state == sets.sets

    def test_fit_rejects_mismatched_sets(self, random_prior):
        gm = GenerativeModel(random_prior)
        sets = CandidateSets(threshold=1.0, sets=((0,),), s_prime=())
        with pytest.raises(SampleBudgetError):
            EmpiricalModelLearner().fit(gm, sets, 10)

    def test_learns_near_optimal_policy(self):
        mdp = random_mdp(4, 3, 0.5, seed=2)
        gm = GenerativeModel(mdp, seed=0)
        policy = learn_from_scratch(gm, LearnerConfig(eps=0.2, samples_per_pair=20000))
        assert is_eps_optimal(mdp, policy, 0.2)
        assert gm.total_samples == 20000 * mdp.n_pairs

    def test_clear_reward_gap_at_small_budget(self):
        # identical kernels; action 0 pays 0.75 on average and action 1 pays 0.25
        transition = np.full((2, 2, 2), 0.5)
        reward = np.zeros_like(transition)
        reward[:, 0] = [1.0, 0.5]
        reward[:, 1] = [0.5, 0.0]
        mdp = Mdp(transition=transition, reward=reward, gamma=0.5, actions_per_state=((0, 1), (0, 1)))
        cfg = LearnerConfig(eps=0.1, budget_scale=0.01)
        successes = sum(
            is_eps_optimal(mdp, learn_from_scratch(GenerativeModel(mdp, seed=seed), cfg), 0.1).passed
            for seed in range(200)
        )
        assert successes >= 190

    def test_functional_entry_point(self, two_state_mdp):
        gm = GenerativeModel(two_state_mdp)
        policy = empirical_model_learner(gm, full_action_sets(gm), LearnerConfig(eps=0.5, samples_per_pair=3))
        assert list(policy.actions) == [0, 0]


class TestQLearning:
    def test_default_schedule(self):
        assert default_schedule(10, 5) == [0, 2, 4, 6, 8, 10]
        assert default_schedule(7, 3) == [0, 2, 4, 6, 7]

    def test_curve_checkpoints(self, random_prior):
        cfg = LearnerConfig(eps=0.5, max_iters=6)
        curve, q = q_learning(
            GenerativeModel(random_prior, seed=0), QFunction.zeros(random_prior), cfg,
            eval_schedule=[0, 3, 6], eval_mdp=random_prior,
        )
        assert [p.sweep for p in curve.points] == [0, 3, 6]
        assert curve.last.samples_used == 6 * random_prior.n_pairs
        assert len(curve.rows()) == 3
        assert np.all(q.values[random_prior.mask] >= 0.0)

    def test_no_curve_without_eval_mdp(self, random_prior):
        curve, _ = q_learning(GenerativeModel(random_prior), QFunction.zeros(random_prior), LearnerConfig(eps=0.5, max_iters=2))
        assert curve.points == []

    def test_warm_start_jumps_ahead(self):
        mdp = make_sailing(SailingInstance(width=3, height=3, n_winds=2), seed=0)
        _, q_star, _ = value_iteration(mdp)
        cfg = LearnerConfig(eps=0.5, max_iters=1)
        warm, _ = q_learning(GenerativeModel(mdp, seed=0), q_star, cfg, [0], eval_mdp=mdp)
        cold, _ = q_learning(GenerativeModel(mdp, seed=0), QFunction.zeros(mdp), cfg, [0], eval_mdp=mdp)
        assert cold.first.mean_value == pytest.approx(0.0)
        assert warm.first.mean_value > 0.1

    def test_converges_on_deterministic_chain(self):
        transition = np.zeros((2, 1, 2))
        transition[0, 0, 1] = transition[1, 0, 0] = 1.0
        reward = np.zeros_like(transition)
        reward[0, 0, 1] = 1.0
        mdp = Mdp(transition=transition, reward=reward, gamma=0.5, actions_per_state=((0,), (0,)))
        _, q_star, _ = value_iteration(mdp)
        _, q = q_learning(GenerativeModel(mdp, seed=0), QFunction.zeros(mdp), LearnerConfig(eps=0.1, max_iters=200))
        assert np.max(np.abs(q.values[mdp.mask] - q_star.values[mdp.mask])) <= 1e-3

    def test_rejects_mismatched_init(self, random_prior, two_state_mdp):
        with pytest.raises(ValueError):
            QLearningAgent().run(GenerativeModel(random_prior), QFunction.zeros(two_state_mdp), LearnerConfig(eps=0.5))


class TestSelector:
    def test_get_learner(self):
        assert isinstance(get_learner("empirical-model"), EmpiricalModelLearner)
        assert isinstance(get_learner("q_learning"), QLearningAgent)

    def test_unknown_learner(self):
        with pytest.raises(ValueError, match="Unknown learner_id"):
            get_learner("nope")

    def test_list_learners(self):
        learners = list_learners()
        assert set(learners) == set(LEARNER_CREATORS)
        assert learners["q_learning"]["name"] == "Q-Learning Agent"


def test_learner_plans_with_configured_tolerance(two_state_mdp, monkeypatch):
    import agents.empirical_model as empirical_model
    from config.settings import get_settings

    monkeypatch.setenv("TRANSFER_MDP_PLANNING_TOL", "1e-6")
    get_settings.cache_clear()
    seen = []

    def recording(mdp, tol):
        seen.append(tol)
        return value_iteration(mdp, tol=tol)

    monkeypatch.setattr(empirical_model, "value_iteration", recording)
    gm = GenerativeModel(two_state_mdp)
    learn_from_scratch(gm, LearnerConfig(eps=0.5, samples_per_pair=3))
    assert seen == [1e-6]
