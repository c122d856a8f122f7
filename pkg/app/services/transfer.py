"""
Transfer by action elimination.

Plan on the prior model, keep only actions whose prior value gap is
below the elimination threshold, then run the plug-in learner on the
contracted MDP at half the target accuracy.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from agents.empirical_model import EmpiricalModelLearner, samples_per_pair
from app.models.configs import TransferConfig
from app.models.mdp import CandidateSets, Mdp, Policy, QFunction
from app.services.planning import candidate_set, is_eps_optimal, value_iteration
from app.services.sampling import GenerativeModel, SampleBudgetReport
from app.utils.errors import IncompatibleModelsError, InternalInvariantError
from config.settings import get_settings

logger = logging.getLogger("transfer")


def compute_c_bar(beta: float, gamma: float, eps: float, strict: bool = False) -> float:
    """
    Elimination threshold min{2/(1-γ), 2β/(1-γ)^2} - ε(1-γ)/2.

    With ``strict`` the full ε(1-γ) is subtracted instead.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if beta < 0 or eps < 0:
        raise ValueError("beta and eps must be nonnegative")
    radius = min(2.0 / (1.0 - gamma), 2.0 * beta / (1.0 - gamma) ** 2)
    slack = eps * (1.0 - gamma)
    return radius - (slack if strict else slack / 2.0)


def upper_bound_samples(n_bar: int, gamma: float, eps: float, delta: float) -> float:
    """Order of the transfer sample complexity, N log(1/δ) / ((1-γ)^3 ε^2), unit constant"""
    return n_bar * math.log(1.0 / delta) / ((1.0 - gamma) ** 3 * eps ** 2)


@dataclass(frozen=True)
class TransferOutcome:
    """Policy returned by the pipeline plus its elimination and sample audit"""

    c_bar: float
    candidate_sets: CandidateSets
    policy: Policy
    samples: SampleBudgetReport
    samples_per_pair: int
    eliminated_fraction: float

    @property
    def n_bar(self) -> int:
        return self.candidate_sets.total_count

    @property
    def samples_over_s_prime(self) -> int:
        return self.samples.total_over(self.candidate_sets.s_prime)

    @property
    def audit_ok(self) -> bool:
        return self.samples.total == self.samples_per_pair * self.candidate_sets.full_count


def eliminated_fraction(sets: CandidateSets, mdp_actions: Sequence[Sequence[int]]) -> float:
    """1 - N / Σ_{s∈S'} |A^s|; zero when no state has a choice"""
    available = sum(len(mdp_actions[s]) for s in sets.s_prime)
    if available == 0:
        return 0.0
    return 1.0 - sets.total_count / available


def check_structure(prior: Mdp, gm: GenerativeModel) -> None:
    if prior.transition.shape[:2] != (gm.n_states, gm.n_actions) or prior.n_states != gm.n_states:
        raise IncompatibleModelsError("prior and oracle differ in state or action count")
    if prior.actions_per_state != gm.actions_per_state:
        raise IncompatibleModelsError("prior and oracle differ in per-state action lists")
    if prior.gamma != gm.gamma:
        raise IncompatibleModelsError(f"discount factors differ: {prior.gamma} vs {gm.gamma}")


def prior_candidate_sets(prior: Mdp, cfg: TransferConfig, q0: Optional[QFunction] = None) -> CandidateSets:
    """Plan on the prior and keep its potential-optimal actions at C̄"""
    if q0 is None:
        _, q0, _ = value_iteration(prior, tol=get_settings().planning_tol)
    c_bar = compute_c_bar(cfg.beta, prior.gamma, cfg.eps, strict=cfg.threshold_variant == "strict")
    if c_bar <= 0:
        logger.warning(f"threshold {c_bar:.4g} <= 0; falling back to the prior argmax sets")
    return candidate_set(q0, c_bar)


def transfer_learn(
    prior: Mdp,
    gm: GenerativeModel,
    cfg: TransferConfig,
    learner: Optional[EmpiricalModelLearner] = None,
) -> TransferOutcome:
    """
    Learn an ε-optimal policy for the MDP behind ``gm`` given a prior
    within TV distance β.

    Args:
        prior: The known approximate model
        gm: Generative model of the unknown MDP
        cfg: β, ε, δ and learner budget
        learner: Optional learner instance

    Returns:
        TransferOutcome
    """
    check_structure(prior, gm)
    sets = prior_candidate_sets(prior, cfg)
    if any(len(acts) == 0 for acts in sets.sets):
        raise InternalInvariantError("candidate set is empty")
    logger.info(
        f"threshold {sets.threshold:.4g} keeps {sets.total_count} of "
        f"{sum(len(prior.actions_per_state[s]) for s in sets.s_prime)} choice pairs"
    )

    learner_cfg = cfg.learner_config()
    n = samples_per_pair(sets, prior.gamma, learner_cfg)
    learner = learner or EmpiricalModelLearner()
    before = gm.report()
    policy = learner.learn(gm, sets, learner_cfg)
    used = gm.report() - before

    outcome = TransferOutcome(
        c_bar=sets.threshold,
        candidate_sets=sets,
        policy=policy,
        samples=used,
        samples_per_pair=n,
        eliminated_fraction=eliminated_fraction(sets, prior.actions_per_state),
    )
    if not outcome.audit_ok:
        raise InternalInvariantError(
            f"sample audit failed: {used.total} != {n} x {sets.full_count}"
        )
    return outcome


def outcome_summary(
    outcome: TransferOutcome,
    cfg: TransferConfig,
    gamma: float,
    truth: Optional[Mdp] = None,
) -> Dict[str, Any]:
    """Flat record for CSV/JSON output; includes the success flag when the truth is known"""
    summary: Dict[str, Any] = {
        "beta": cfg.beta,
        "gamma": gamma,
        "eps": cfg.eps,
        "delta": cfg.delta,
        "c_bar": outcome.c_bar,
        "candidate_sizes": " ".join(str(n) for n in outcome.candidate_sets.sizes),
        "n_bar": outcome.n_bar,
        "samples_per_pair": outcome.samples_per_pair,
        "samples": outcome.samples.total,
        "samples_s_prime": outcome.samples_over_s_prime,
        "eliminated_fraction": outcome.eliminated_fraction,
        "upper_bound_order": upper_bound_samples(outcome.n_bar, gamma, cfg.eps, cfg.delta),
    }
    if truth is not None:
        summary["success"] = bool(is_eps_optimal(truth, outcome.policy, cfg.eps))
    return summary


def bounds_meet(q: QFunction, c_upper: float, c_lower: Sequence[float]) -> np.ndarray:
    """
    Per state, whether the candidate sets at the upper threshold and at the
    state's lower threshold coincide.
    """
    upper = candidate_set(q, c_upper)
    meets = []
    for s, c in enumerate(c_lower):
        lower = candidate_set(q, c)
        meets.append(set(upper.sets[s]) == set(lower.sets[s]))
    return np.array(meets, dtype=bool)
