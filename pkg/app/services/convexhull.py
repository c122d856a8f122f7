"""
Transfer when the unknown MDP is a convex mixture of K known base MDPs.

A handful of anchor (s, a) pairs identifies the mixture: their stacked
transition rows form a full-column-rank matrix U_trun with P_t = U_trun C_t.
Sampling the anchors gives an estimate of P_t, least squares plus simplex
projection gives the coefficients, and planning on the mixed model gives
the policy.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from app.models.mdp import Mdp, Policy
from app.services.planning import check_compatible, value_iteration
from app.services.sampling import GenerativeModel
from app.utils.errors import AssumptionViolationError
from config.settings import get_settings

logger = logging.getLogger("convexhull")

RANK_TOL = 1e-10
SIMPLEX_TOL = 1e-12
DEFAULT_SAMPLE_SCALE = 1e-4


@dataclass(frozen=True, eq=False)
class MixCoefficients:
    """A point on the probability simplex"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 1 or len(values) == 0:
            raise ValueError("coefficients must be a nonempty vector")
        if np.any(values < 0.0) or abs(values.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"coefficients {values} are not on the simplex")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def distance(self, other: "MixCoefficients") -> float:
        return float(np.linalg.norm(self.values - other.values))


@dataclass(frozen=True, eq=False)
class HullModel:
    """
    Base models plus the anchor pairs that identify mixtures of them.

    Column k of ``u_trun`` stacks the anchor transition rows of base k,
    divided by K.
    """

    bases: Tuple[Mdp, ...]
    anchor_pairs: Tuple[Tuple[int, int], ...]
    u_trun: np.ndarray
    lambda_min: float
    lambda_max: float

    @property
    def K(self) -> int:
        return len(self.bases)

    @property
    def n_states(self) -> int:
        return self.bases[0].n_states

    @property
    def gamma(self) -> float:
        return self.bases[0].gamma


def project_simplex(v: Sequence[float]) -> MixCoefficients:
    """
    Euclidean projection onto the probability simplex (sort-based).
    """
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(len(v)) + 1
    cond = u - cssv / ind > 0
    rho = np.count_nonzero(cond)
    theta = cssv[rho - 1] / rho
    w = np.maximum(v - theta, 0.0)
    # absorb round-off so the sum is exactly representable as 1
    w /= w.sum()
    return MixCoefficients(values=w)


def _pair_block(bases: Sequence[Mdp], s: int, a: int) -> np.ndarray:
    """S x K matrix whose column k is P^k(s, a, .)"""
    return np.stack([m.transition[s, a] for m in bases], axis=1)


def _rank(matrix: np.ndarray) -> int:
    return int(np.count_nonzero(scipy.linalg.svdvals(matrix) > RANK_TOL))


def select_anchor_pairs(bases: Sequence[Mdp]) -> HullModel:
    """
    Pick K anchor pairs by greedy rank augmentation and build U_trun.

    Pairs are scanned in index order and kept when their block raises the
    rank of the accumulated stack; once rank K is reached the anchors are
    padded with repeats of the kept pairs.

    Raises:
        AssumptionViolationError: If the full stack has column rank below K
    """
    bases = tuple(bases)
    if not bases:
        raise ValueError("at least one base model is required")
    for m in bases[1:]:
        check_compatible(bases[0], m)
    K = len(bases)

    kept: List[Tuple[int, int]] = []
    stack = np.zeros((0, K))
    rank = 0
    for s, a in bases[0].pairs():
        candidate = np.vstack([stack, _pair_block(bases, s, a)])
        new_rank = _rank(candidate)
        if new_rank > rank:
            kept.append((s, a))
            stack, rank = candidate, new_rank
            if rank == K:
                break
    if rank < K:
        raise AssumptionViolationError(
            f"stacked base transitions have column rank {rank} < K={K}; full column rank is required"
        )

    anchors = list(kept)
    while len(anchors) < K:
        anchors.append(kept[len(anchors) % len(kept)])

    u_trun = np.vstack([_pair_block(bases, s, a) for s, a in anchors]) / K
    eigenvalues = scipy.linalg.eigvalsh(u_trun.T @ u_trun)
    hull = HullModel(
        bases=bases,
        anchor_pairs=tuple(anchors),
        u_trun=u_trun,
        lambda_min=float(eigenvalues[0]),
        lambda_max=float(eigenvalues[-1]),
    )
    logger.info(
        f"selected anchors {hull.anchor_pairs} (lambda_min={hull.lambda_min:.3e}, "
        f"lambda_max={hull.lambda_max:.3e})"
    )
    return hull


def exact_stacked(hull: HullModel, mdp: Mdp) -> np.ndarray:
    """Noise-free P_t: the anchor rows of ``mdp`` stacked and divided by K"""
    return np.concatenate([mdp.transition[s, a] for s, a in hull.anchor_pairs]) / hull.K


def coefficients_from_stacked(hull: HullModel, p_stacked: np.ndarray) -> MixCoefficients:
    """Least-squares solution of U_trun c = P, projected onto the simplex"""
    solution, _, _, _ = scipy.linalg.lstsq(hull.u_trun, np.asarray(p_stacked, dtype=float))
    if np.any(solution < -SIMPLEX_TOL):
        logger.debug(f"projection clips negative coefficients {solution}")
    return project_simplex(solution)


def estimate_coefficients(
    hull: HullModel,
    gm: GenerativeModel,
    n_samples: int,
    seed: int = 0,
) -> Tuple[MixCoefficients, np.ndarray]:
    """
    Estimate the mixture weights from ``n_samples`` anchor transitions.

    Each sample picks an anchor j uniformly and draws one transition from
    it; the hit on s' increments coordinate j*S + s'.

    Returns:
        (coefficients, empirical stacked vector P̂)
    """
    if n_samples < 1:
        raise ValueError(f"sample count must be at least 1, got {n_samples}")
    S = hull.n_states
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    picks = np.bincount(rng.integers(hull.K, size=n_samples), minlength=hull.K)
    p_hat = np.zeros(hull.K * S)
    for j, (s, a) in enumerate(hull.anchor_pairs):
        if picks[j] == 0:
            continue
        next_states, _ = gm.sample_many(s, a, int(picks[j]))
        p_hat[j * S:(j + 1) * S] += np.bincount(next_states, minlength=S)
    p_hat /= n_samples
    return coefficients_from_stacked(hull, p_hat), p_hat


def theoretical_sample_count(hull: HullModel, eps: float, delta: float) -> int:
    """⌈432 K λmax / (ε² (1-γ)^4 λmin²) log((1 + K S)/δ)⌉"""
    K, gamma = hull.K, hull.gamma
    count = (
        432.0 * K * hull.lambda_max
        / (eps ** 2 * (1.0 - gamma) ** 4 * hull.lambda_min ** 2)
        * math.log((1.0 + K * hull.n_states) / delta)
    )
    return int(math.ceil(count))


def hull_gap_bound(eps_prime: float, alpha: float, K: int, gamma: float) -> float:
    """Suboptimality guarantee ε' + 6 α √K / (1-γ)^2 for a coefficient error α"""
    return eps_prime + 6.0 * alpha * math.sqrt(K) / (1.0 - gamma) ** 2


def mix_bases(bases: Sequence[Mdp], coefficients: MixCoefficients) -> Mdp:
    """
    Σ_k c_k M^k. Kernels mix directly; rewards mix in expectation, so the
    mixed reward is r(s, a) = Σ_k c_k r^k(s, a) for every next state.
    """
    if len(bases) != len(coefficients):
        raise ValueError(f"{len(bases)} bases but {len(coefficients)} coefficients")
    c = coefficients.values
    transition = np.einsum("k,ksap->sap", c, np.stack([m.transition for m in bases]))
    expected = np.einsum("k,ksa->sa", c, np.stack([m.expected_reward for m in bases]))
    reward = np.clip(np.broadcast_to(expected[:, :, None], transition.shape), 0.0, 1.0)
    # renormalize to remove summation round-off on each available row
    sums = transition.sum(axis=2, keepdims=True)
    transition = np.divide(transition, sums, out=np.zeros_like(transition), where=sums > 0)
    return Mdp(
        transition=transition,
        reward=reward,
        gamma=bases[0].gamma,
        actions_per_state=bases[0].actions_per_state,
    )


@dataclass(frozen=True, eq=False)
class HullTransferResult:
    policy: Policy
    coefficients: MixCoefficients
    surrogate: Mdp
    n_samples: int
    theoretical_samples: int


def hull_transfer(
    hull: HullModel,
    gm: GenerativeModel,
    eps: float,
    delta: float,
    scale: float = DEFAULT_SAMPLE_SCALE,
    seed: int = 0,
    n_samples: Optional[int] = None,
) -> HullTransferResult:
    """
    Estimate the mixture, plan on the mixed model and return its greedy policy.

    Args:
        hull: Base models with anchors
        gm: Generative model of the unknown mixture
        eps: Target accuracy
        delta: Failure probability
        scale: Factor applied to the theoretical sample count
        seed: Seed for the anchor choices
        n_samples: Explicit sample count, overriding the scaled formula

    Returns:
        HullTransferResult
    """
    if not eps > 0 or not 0 < delta < 1:
        raise ValueError("eps must be positive and delta must lie in (0, 1)")
    theoretical = theoretical_sample_count(hull, eps, delta)
    if n_samples is None:
        n_samples = max(1, int(math.ceil(scale * theoretical)))
        if n_samples < theoretical:
            logger.warning(f"using {n_samples} anchor samples, {scale:g} of the theoretical {theoretical}")
    coefficients, _ = estimate_coefficients(hull, gm, n_samples, seed=seed)
    surrogate = mix_bases(hull.bases, coefficients)
    _, _, policy = value_iteration(surrogate, tol=min(get_settings().planning_tol, eps / 2.0))
    logger.info(f"estimated coefficients {np.round(coefficients.values, 4)} from {n_samples} samples")
    return HullTransferResult(
        policy=policy,
        coefficients=coefficients,
        surrogate=surrogate,
        n_samples=n_samples,
        theoretical_samples=theoretical,
    )


def hull_sequence(
    hull: HullModel,
    oracles: Sequence[GenerativeModel],
    eps: float,
    delta: float,
    scale: float = DEFAULT_SAMPLE_SCALE,
    seed: int = 0,
) -> List[HullTransferResult]:
    """Independent single-shot transfers for a sequence of unknown models"""
    return [
        hull_transfer(hull, gm, eps, delta, scale=scale, seed=seed + t)
        for t, gm in enumerate(oracles)
    ]
