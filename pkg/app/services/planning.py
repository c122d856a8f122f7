"""
Exact planning on tabular MDPs.

Value iteration, exact policy evaluation, the total-variation model
distance, potential-optimal candidate sets and the B_TV ball perturbation
used to generate test instances.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from app.models.mdp import CandidateSets, Mdp, Policy, QFunction, ValueFunction
from app.utils.errors import (IncompatibleModelsError, InternalInvariantError,
                              PlanningError)

logger = logging.getLogger("planning")

PLANNING_TOL = 1e-9
ARGMAX_TOL = 1e-9
EVAL_ROUNDOFF = 1e-9


def q_backup(mdp: Mdp, v: np.ndarray) -> np.ndarray:
    """One Bellman backup of V into Q; unavailable pairs are -inf"""
    q = mdp.expected_reward + mdp.gamma * (mdp.transition @ v)
    return np.where(mdp.mask, q, -np.inf)


def bellman_backup(mdp: Mdp, v: np.ndarray) -> np.ndarray:
    """Bellman optimality operator (T V)(s) = max_a Q(s, a)"""
    return q_backup(mdp, v).max(axis=1)


def _iteration_cap(mdp: Mdp, tol: float) -> int:
    target = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma * mdp.v_max)
    # a loose tol makes the log ratio negative
    return max(1, int(math.ceil(math.log(target) / math.log(mdp.gamma)))) + 10


def value_iteration(mdp: Mdp, tol: float = PLANNING_TOL) -> Tuple[ValueFunction, QFunction, Policy]:
    """
    Solve the Bellman optimality equation to sup-norm accuracy ``tol``.

    Iterates until the successive-iterate gap is at most tol(1-γ)/(2γ),
    which bounds the distance to V* by tol/2.

    Args:
        mdp: The MDP to plan on
        tol: Target accuracy, positive

    Returns:
        (V, Q, greedy policy) with lowest-index tie-breaking

    Raises:
        PlanningError: On non-finite arithmetic or if the iteration cap is hit
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    stop_gap = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma)
    cap = _iteration_cap(mdp, tol)
    v = np.zeros(mdp.n_states)
    for it in range(1, cap + 1):
        v_next = bellman_backup(mdp, v)
        if not np.all(np.isfinite(v_next)):
            raise PlanningError(f"value iteration produced non-finite values at iteration {it}")
        gap = float(np.max(np.abs(v_next - v)))
        v = v_next
        if gap <= stop_gap:
            logger.debug(f"value iteration converged after {it} iterations (gap {gap:.3e})")
            break
    else:
        raise PlanningError(f"value iteration did not reach tol {tol} within {cap} iterations")

    q_values = q_backup(mdp, v)
    if not np.all(np.isfinite(q_values[mdp.mask])):
        raise PlanningError("Q backup produced non-finite values")
    q = QFunction(values=q_values, mask=mdp.mask, gamma=mdp.gamma)
    value = ValueFunction(values=q.state_values(), gamma=mdp.gamma)
    return value, q, q.greedy()


def policy_evaluation_exact(mdp: Mdp, pi: Policy) -> ValueFunction:
    """
    Solve V = R^π + γ P^π V by a direct linear solve.

    Args:
        mdp: The MDP
        pi: A policy valid for ``mdp``

    Returns:
        The exact value of ``pi``
    """
    pi.validate_for(mdp)
    states = np.arange(mdp.n_states)
    p_pi = mdp.transition[states, pi.actions, :]
    r_pi = mdp.expected_reward[states, pi.actions]
    system = np.eye(mdp.n_states) - mdp.gamma * p_pi
    try:
        values = scipy.linalg.solve(system, r_pi)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise PlanningError(f"policy evaluation system is singular: {e}") from e
    if not np.all(np.isfinite(values)):
        raise PlanningError("policy evaluation produced non-finite values")
    low, high = -EVAL_ROUNDOFF, mdp.v_max + EVAL_ROUNDOFF
    if np.any(values < low) or np.any(values > high):
        raise PlanningError(f"policy value outside [0, {mdp.v_max}] beyond round-off")
    return ValueFunction(values=np.clip(values, 0.0, mdp.v_max), gamma=mdp.gamma)


def check_compatible(m0: Mdp, m: Mdp) -> None:
    """Raise IncompatibleModelsError unless both models share structure and γ"""
    if m0.transition.shape != m.transition.shape:
        raise IncompatibleModelsError(
            f"state/action shapes differ: {m0.transition.shape} vs {m.transition.shape}"
        )
    if m0.actions_per_state != m.actions_per_state:
        raise IncompatibleModelsError("per-state action lists differ")
    if m0.gamma != m.gamma:
        raise IncompatibleModelsError(f"discount factors differ: {m0.gamma} vs {m.gamma}")


def _row_l1(p0: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.abs(p0 - p).sum(axis=-1)


def tv_distance(m0: Mdp, m: Mdp) -> float:
    """
    Model distance: the max over pairs of the L1 transition gap, joined
    with the sup-norm reward gap over all (s, a, s').
    """
    check_compatible(m0, m)
    mask = m0.mask
    transition_gap = float(_row_l1(m0.transition, m.transition)[mask].max())
    reward_gap = float(np.abs(m0.reward - m.reward)[mask].max())
    return max(transition_gap, reward_gap)


def candidate_set(q: QFunction, c: float) -> CandidateSets:
    """
    Potential-optimal actions {a : V(s) - Q(s, a) < c} per state.

    For c <= 0 the exact argmax set is returned (ties within 1e-9); for
    c > 1/(1-γ) every available action is kept.
    """
    if not np.all(np.isfinite(q.values[q.mask])):
        raise ValueError("Q must be finite on available pairs")
    v_max = 1.0 / (1.0 - q.gamma)
    best = q.state_values()
    sets = []
    for s in range(q.values.shape[0]):
        available = np.flatnonzero(q.mask[s])
        gaps = best[s] - q.values[s, available]
        if c > v_max:
            keep = available
        elif c <= 0:
            keep = available[gaps <= ARGMAX_TOL]
        else:
            keep = available[gaps < c]
        sets.append(tuple(int(a) for a in keep))
    s_prime = tuple(s for s in range(q.mask.shape[0]) if q.mask[s].sum() > 1)
    return CandidateSets(threshold=float(c), sets=tuple(sets), s_prime=s_prime)


@dataclass(frozen=True, eq=False)
class OptimalityReport:
    """Outcome of an ε-optimality check with per-state gaps V*(s) - V^π(s)"""

    passed: bool
    gaps: np.ndarray
    eps: float

    @property
    def worst_gap(self) -> float:
        return float(np.max(self.gaps))

    def __bool__(self) -> bool:
        return self.passed


def is_eps_optimal(mdp: Mdp, pi: Policy, eps: float, v_star: Optional[ValueFunction] = None) -> OptimalityReport:
    """
    Check V^π(s) >= V*(s) - eps at every state.

    Args:
        mdp: The MDP
        pi: Policy to check
        eps: Accuracy, positive
        v_star: Optional precomputed V*; planned at tol eps/100 otherwise

    Returns:
        OptimalityReport
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if v_star is None:
        v_star, _, _ = value_iteration(mdp, tol=eps / 100.0)
    v_pi = policy_evaluation_exact(mdp, pi)
    gaps = v_star.values - v_pi.values
    return OptimalityReport(passed=bool(np.min(v_pi.values - v_star.values) >= -eps), gaps=gaps, eps=eps)


def _perturb_row(p0: np.ndarray, beta: float, rng: np.random.Generator) -> np.ndarray:
    direction = rng.standard_normal(p0.shape)
    direction -= direction.mean()
    norm = np.abs(direction).sum()
    if norm == 0.0:
        return p0.copy()
    direction *= beta * rng.uniform() / norm
    for _ in range(64):
        p = np.clip(p0 + direction, 0.0, None)
        p /= p.sum()
        if _row_l1(p0, p) <= beta:
            return p
        direction *= 0.5
    return p0.copy()


def perturb_within_ball(m0: Mdp, beta: float, rng_seed: int) -> Mdp:
    """
    Draw an MDP inside the TV ball of radius ``beta`` around ``m0``.

    Transition rows move along a random zero-sum direction of L1 norm at
    most beta, are clipped and renormalized, and the step is halved until
    the L1 bound holds again. Rewards move by at most beta and are clipped
    to [0, 1]. Deterministic per seed.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    rng = np.random.default_rng(rng_seed)
    transition = np.array(m0.transition)
    reward = np.array(m0.reward)
    for s, a in m0.pairs():
        transition[s, a] = _perturb_row(m0.transition[s, a], beta, rng)
        noise = rng.uniform(-beta, beta, size=m0.n_states)
        reward[s, a] = np.clip(m0.reward[s, a] + noise, 0.0, 1.0)
    perturbed = Mdp(
        transition=transition,
        reward=reward,
        gamma=m0.gamma,
        actions_per_state=m0.actions_per_state,
    )
    distance = tv_distance(m0, perturbed)
    if distance > beta:
        raise InternalInvariantError(f"perturbed model left the ball: {distance} > {beta}")
    return perturbed
