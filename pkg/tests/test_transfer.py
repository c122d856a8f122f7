import numpy as np
import pytest

from app.models.configs import TransferConfig
from app.services.instances import (elimination_instance, prior_truth_pair,
                                    random_mdp, single_reward_instance,
                                    uniform_reward_instance)
from app.services.planning import (candidate_set, is_eps_optimal,
                                   perturb_within_ball, value_iteration)
from app.services.sampling import GenerativeModel
from app.services.transfer import (bounds_meet, check_structure, compute_c_bar,
                                   eliminated_fraction, outcome_summary,
                                   prior_candidate_sets, transfer_learn,
                                   upper_bound_samples)
from app.utils.errors import IncompatibleModelsError


class TestThreshold:
    def test_radius_branch(self):
        assert compute_c_bar(0.004, 0.9, 0.2) == pytest.approx(0.79)

    def test_horizon_branch(self):
        assert compute_c_bar(0.2, 0.9, 0.01) == pytest.approx(19.9995)

    def test_strict_variant_subtracts_more(self):
        assert compute_c_bar(0.004, 0.9, 0.2, strict=True) == pytest.approx(0.78)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            compute_c_bar(0.1, 1.0, 0.1)
        with pytest.raises(ValueError):
            compute_c_bar(-0.1, 0.9, 0.1)

    def test_upper_bound_order(self):
        expected = 24 * np.log(20.0) / ((1.0 - 0.9) ** 3 * 0.2 ** 2)
        assert upper_bound_samples(24, 0.9, 0.2, 0.05) == pytest.approx(expected)


class TestCandidateElimination:
    def test_elimination_keeps_the_good_half(self):
        prior = elimination_instance()
        sets = prior_candidate_sets(prior, TransferConfig(beta=0.004, eps=0.2))
        assert sets.sizes == (4,) * 6
        assert all(acts == (0, 1, 2, 3) for acts in sets.sets)
        assert sets.total_count == 24
        assert eliminated_fraction(sets, prior.actions_per_state) == pytest.approx(0.5)

    def test_single_rewarding_action(self):
        prior = single_reward_instance()
        sets = prior_candidate_sets(prior, TransferConfig(beta=0.002, eps=0.2))
        assert sets.total_count == len(prior.s_prime)

    def test_indistinguishable_actions(self):
        prior = uniform_reward_instance()
        sets = prior_candidate_sets(prior, TransferConfig(beta=0.05, eps=0.2))
        assert sets.sets == prior.actions_per_state
        assert eliminated_fraction(sets, prior.actions_per_state) == 0.0

    def test_negative_threshold_falls_back_to_argmax(self, two_state_mdp):
        sets = prior_candidate_sets(two_state_mdp, TransferConfig(beta=1e-6, eps=1.0))
        assert sets.threshold < 0
        assert sets.sets == ((0,), (0,))

    def test_truth_optimal_action_survives(self):
        for seed in range(5):
            prior = random_mdp(6, 4, 0.9, seed=seed)
            truth = perturb_within_ball(prior, 0.01, rng_seed=seed + 100)
            sets = prior_candidate_sets(prior, TransferConfig(beta=0.01, eps=0.1))
            _, _, pi_star = value_iteration(truth)
            for s in range(prior.n_states):
                assert pi_star[s] in sets.sets[s]

    def test_smaller_radius_keeps_fewer_actions(self):
        prior = random_mdp(6, 4, 0.9, seed=3)
        betas = [0.2, 0.05, 0.01, 0.002]
        sets = [prior_candidate_sets(prior, TransferConfig(beta=beta, eps=0.1)) for beta in betas]
        for wide, narrow in zip(sets, sets[1:]):
            assert wide.contains(narrow)

    def test_bounds_meet(self, two_state_mdp):
        _, q, _ = value_iteration(two_state_mdp)
        assert list(bounds_meet(q, 5.0, [6.0, 6.0])) == [True, True]
        assert list(bounds_meet(q, 11.0, [5.0, 5.0])) == [False, True]


class TestTransferLearn:
    @pytest.fixture
    def elimination_pair(self):
        prior = elimination_instance(seed=0)
        return prior, perturb_within_ball(prior, 0.004, rng_seed=1)

    def test_samples_only_candidate_pairs(self, elimination_pair):
        prior, truth = elimination_pair
        gm = GenerativeModel(truth, seed=0)
        cfg = TransferConfig(beta=0.004, eps=0.2, samples_per_pair=200)
        outcome = transfer_learn(prior, gm, cfg)
        counts = outcome.samples.counts
        assert outcome.audit_ok
        assert outcome.samples.total == 200 * 24
        assert counts[:, 4:].sum() == 0
        assert outcome.n_bar == 24
        assert outcome.samples_over_s_prime == outcome.samples.total
        assert outcome.c_bar == pytest.approx(0.79)

    def test_policy_is_eps_optimal(self, elimination_pair):
        prior, truth = elimination_pair
        cfg = TransferConfig(beta=0.004, eps=0.2, samples_per_pair=500)
        outcome = transfer_learn(prior, GenerativeModel(truth, seed=3), cfg)
        assert all(outcome.policy[s] in outcome.candidate_sets.sets[s] for s in range(prior.n_states))
        assert is_eps_optimal(truth, outcome.policy, cfg.eps)

    def test_budget_formula_counts_retained_pairs_only(self, elimination_pair):
        prior, truth = elimination_pair
        cfg = TransferConfig(beta=0.004, eps=0.2, budget_scale=1e-3)
        outcome = transfer_learn(prior, GenerativeModel(truth, seed=0), cfg)
        expected = int(np.ceil(1e-3 * np.log(2 * 24 / 0.05) / ((1.0 - 0.9) ** 3 * 0.1 ** 2)))
        assert outcome.samples_per_pair == expected
        assert outcome.samples.total == expected * 24

    def test_structure_mismatch(self, random_prior):
        other = random_mdp(6, 3, 0.9, seed=0)
        with pytest.raises(IncompatibleModelsError):
            transfer_learn(random_prior, GenerativeModel(other), TransferConfig(beta=0.1, eps=0.5))
        with pytest.raises(IncompatibleModelsError, match="discount"):
            check_structure(random_prior, GenerativeModel(random_mdp(5, 3, 0.8, seed=0)))

    def test_outcome_summary(self, elimination_pair):
        prior, truth = elimination_pair
        cfg = TransferConfig(beta=0.004, eps=0.2, samples_per_pair=300)
        outcome = transfer_learn(prior, GenerativeModel(truth, seed=0), cfg)
        summary = outcome_summary(outcome, cfg, prior.gamma, truth=truth)
        assert summary["n_bar"] == 24
        assert summary["candidate_sizes"] == "4 4 4 4 4 4"
        assert summary["samples"] == 300 * 24
        assert summary["eliminated_fraction"] == pytest.approx(0.5)
        assert summary["success"] is True
        assert "success" not in outcome_summary(outcome, cfg, prior.gamma)


def test_prior_truth_pair_stays_in_ball():
    from app.services.planning import tv_distance

    prior, truth = prior_truth_pair("single-reward", 0.01, seed=4)
    assert tv_distance(prior, truth) <= 0.01
    with pytest.raises(ValueError):
        prior_truth_pair("unknown", 0.01, seed=0)
