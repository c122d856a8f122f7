"""
Lower-bound family of three-layer MDPs.

Every decision state x_k offers L actions; action a_l moves
deterministically to its own chain state y1(k, l), which loops on itself
with probability p(x_k, a_l) (reward 1) and otherwise falls into an
absorbing zero-reward state y2(k, l). Hence Q(x_k, a_l) = 1/(1 - γ p).

State layout: x_k = k, y1(k, l) = K + k L + l, y2(k, l) = K + K L + k L + l.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.configs import (HardCaseParams, hardcase_gamma_range,
                                hardcase_p0_floor)
from app.models.mdp import PROB_TOL, Mdp
from app.services.planning import candidate_set, tv_distance, value_iteration
from app.services.sampling import GenerativeModel, oracle_for
from app.services.transfer import compute_c_bar
from app.utils.errors import InternalInvariantError, ParameterDomainError

logger = logging.getLogger("hardcase")

RESIDUAL_TOL = 1e-10
SEPARATION_TOL = 1e-11
RUNNER_UP_TOL = 1e-9


def _q(gamma: float, p: float) -> float:
    return 1.0 / (1.0 - gamma * p)


@dataclass(frozen=True)
class HardCaseDerived:
    """
    Closed-form quantities of the family, one entry per decision state.

    ``c_lower`` is the per-state lower elimination threshold in closed
    form; ``c_lower_direct`` is the same threshold read off the window
    edge p0k + α2 - β/2 directly.
    """

    p0k: Tuple[float, ...]
    eps0: float
    alpha1: Tuple[float, ...]
    alpha2: Tuple[float, ...]
    Lk: Tuple[int, ...]
    c_lower: Tuple[float, ...]
    c_lower_direct: Tuple[float, ...]
    c_bar: float
    v_star: Tuple[float, ...]
    lower_case: int

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class HardCaseFamily:
    prior: Mdp
    hypothesis_m1: Mdp
    hypotheses_kl: Tuple[Tuple[int, int, Mdp], ...]
    derived: HardCaseDerived
    params: HardCaseParams

    @property
    def n_hypotheses(self) -> int:
        return 1 + len(self.hypotheses_kl)

    def hypotheses(self) -> List[Tuple[str, Mdp]]:
        """M1 first, then M_{k,l} with k outer and l inner (1-based labels)"""
        labelled = [("M1", self.hypothesis_m1)]
        labelled += [(f"M_{k + 1},{l + 1}", m) for k, l, m in self.hypotheses_kl]
        return labelled


def p0k_value(p0_leading: float, beta: float, gamma: float) -> float:
    """max{p0(x_k, a_1) - β/2, (4γ-1)/(3γ)}"""
    return max(p0_leading - beta / 2.0, hardcase_p0_floor(gamma))


def eps0_value(p0k: Iterable[float], beta: float, gamma: float) -> float:
    """min_k βγ(1 - p0k) / (16 (1 - γ p0k)^2)"""
    return min(beta * gamma * (1.0 - p) / (16.0 * (1.0 - gamma * p) ** 2) for p in p0k)


def alpha1_value(p0k: float, gamma: float, eps: float) -> float:
    """Solves 1/(1-γ(p0k+α1)) - 1/(1-γ p0k) = 2ε for α1"""
    return (1.0 - 1.0 / (_q(gamma, p0k) + 2.0 * eps)) / gamma - p0k


def alpha2_value(p0k: float, gamma: float, eps: float) -> float:
    return 4.0 * (1.0 - gamma * p0k) ** 2 * eps / gamma


def lower_threshold(v_star: float, beta: float, gamma: float, eps: float) -> Tuple[float, int]:
    """
    Closed-form lower threshold for one decision state and the case used.

    Case 1 applies when β/2 + (4γ-1)/(3γ) >= 1.
    """
    if beta / 2.0 + hardcase_p0_floor(gamma) >= 1.0:
        denom = 12.0 * (1.0 - gamma) - 64.0 * (1.0 - gamma) ** 2 * eps + 4.5 * beta * gamma
        return v_star - 9.0 / denom, 1
    denom = v_star + beta * gamma * v_star ** 2 + 4.0 * eps * (1.0 + gamma * beta * v_star / 2.0) ** 2
    return v_star - v_star ** 2 / denom, 2


def lk_membership(params: HardCaseParams, p0k: Sequence[float], alpha2: Sequence[float]) -> List[List[bool]]:
    """Per decision state, which actions have |p0k + α2 - p0(x_k, a_l)| <= β/2"""
    half = params.beta / 2.0
    return [
        [abs(p0k[k] + alpha2[k] - p) <= half for p in row]
        for k, row in enumerate(params.p0)
    ]


def derive_params(params: HardCaseParams) -> HardCaseDerived:
    """
    Evaluate every closed-form quantity of the family.

    Args:
        params: Validated family parameters

    Returns:
        HardCaseDerived

    Raises:
        ParameterDomainError: If eps >= eps0
        InternalInvariantError: If a re-verified relation fails
    """
    beta, gamma, eps = params.beta, params.gamma, params.eps
    p0k = tuple(p0k_value(row[0], beta, gamma) for row in params.p0)
    eps0 = eps0_value(p0k, beta, gamma)
    if not eps < eps0:
        raise ParameterDomainError("eps < eps0", f"eps={eps}, eps0={eps0:.6g}")

    alpha1 = tuple(alpha1_value(p, gamma, eps) for p in p0k)
    alpha2 = tuple(alpha2_value(p, gamma, eps) for p in p0k)
    for k, (p, a1, a2) in enumerate(zip(p0k, alpha1, alpha2)):
        if not 0.0 < a1 < a2 < beta / 2.0:
            raise InternalInvariantError(f"state {k}: expected 0 < alpha1 < alpha2 < beta/2, got {a1}, {a2}")
        if not p + a2 < 1.0:
            raise InternalInvariantError(f"state {k}: p0k + alpha2 = {p + a2} is not below 1")
        residual = _q(gamma, p + a1) - _q(gamma, p) - 2.0 * eps
        if abs(residual) > RESIDUAL_TOL:
            raise InternalInvariantError(f"state {k}: alpha1 residual {residual:.3e}")
        if _q(gamma, p + a2) - _q(gamma, p + a1) < 2.0 * eps - RESIDUAL_TOL:
            raise InternalInvariantError(f"state {k}: alpha2 does not separate by 2 eps")

    membership = lk_membership(params, p0k, alpha2)
    lk = []
    for k, row in enumerate(membership):
        count = sum(row)
        if row[:count] != [True] * count:
            raise InternalInvariantError(f"state {k}: window members are not a prefix of the sorted row")
        lk.append(count)

    v_star = tuple(_q(gamma, row[0]) for row in params.p0)
    lowers = [lower_threshold(v, beta, gamma, eps) for v in v_star]
    direct = tuple(v - _q(gamma, p + a2 - beta / 2.0) for v, p, a2 in zip(v_star, p0k, alpha2))

    derived = HardCaseDerived(
        p0k=p0k,
        eps0=eps0,
        alpha1=alpha1,
        alpha2=alpha2,
        Lk=tuple(lk),
        c_lower=tuple(c for c, _ in lowers),
        c_lower_direct=direct,
        c_bar=compute_c_bar(beta, gamma, eps),
        v_star=v_star,
        lower_case=lowers[0][1],
    )
    logger.debug(f"derived hard-case parameters: {derived}")
    return derived


def _family_mdp(params: HardCaseParams, loops: np.ndarray) -> Mdp:
    """Three-layer MDP whose chain state y1(k, l) self-loops with probability loops[k, l]"""
    K, L = params.K, params.L
    n_states = K + 2 * K * L
    transition = np.zeros((n_states, L, n_states))
    reward = np.zeros_like(transition)
    actions = [tuple(range(L))] * K + [(0,)] * (2 * K * L)
    for k in range(K):
        for l in range(L):
            y1 = K + k * L + l
            y2 = K + K * L + k * L + l
            transition[k, l, y1] = 1.0
            reward[k, l, y1] = 1.0
            p = float(loops[k, l])
            transition[y1, 0, y1] = p
            transition[y1, 0, y2] = 1.0 - p
            reward[y1, 0, y1] = 1.0
            transition[y2, 0, y2] = 1.0
    return Mdp(transition=transition, reward=reward, gamma=params.gamma, actions_per_state=tuple(actions))


def assemble_family(params: HardCaseParams, derived: HardCaseDerived) -> HardCaseFamily:
    """Build the prior and every hypothesis from already derived quantities"""
    p0 = np.array(params.p0, dtype=float)
    m1_loops = p0.copy()
    for k in range(params.K):
        m1_loops[k, 0] = derived.p0k[k] + derived.alpha1[k]
        m1_loops[k, 1:derived.Lk[k]] = derived.p0k[k]

    hypotheses = []
    for k in range(params.K):
        for l in range(1, derived.Lk[k]):
            loops = m1_loops.copy()
            loops[k, l] = derived.p0k[k] + derived.alpha2[k]
            hypotheses.append((k, l, _family_mdp(params, loops)))

    family = HardCaseFamily(
        prior=_family_mdp(params, p0),
        hypothesis_m1=_family_mdp(params, m1_loops),
        hypotheses_kl=tuple(hypotheses),
        derived=derived,
        params=params,
    )
    logger.info(f"built hard-case family with K={params.K}, L={params.L}: {family.n_hypotheses} hypotheses")
    return family


def build_family(params: HardCaseParams) -> HardCaseFamily:
    return assemble_family(params, derive_params(params))


def family_oracles(fam: HardCaseFamily, seed: int = 0) -> List[GenerativeModel]:
    """One generative model per hypothesis, in ``fam.hypotheses()`` order"""
    return [oracle_for(m, seed=seed) for _, m in fam.hypotheses()]


def verify_ball_membership(fam: HardCaseFamily) -> bool:
    """True iff every hypothesis lies within TV distance β of the prior"""
    beta = fam.params.beta
    for label, m in fam.hypotheses():
        distance = tv_distance(fam.prior, m)
        if distance > beta + PROB_TOL:
            logger.warning(f"{label} lies outside the ball: distance {distance:.6g} > {beta}")
            return False
    return True


@dataclass(frozen=True)
class SeparationMargin:
    """
    Margin of one hypothesis at decision state k.

    For M1 the margin is the runner-up gap at x_k; for M_{k,l} it is
    Q(x_k, a_l) - Q(x_k, a_1).
    """

    hypothesis: str
    k: int
    best_action: int
    expected_action: int
    margin: float
    passed: bool


@dataclass(frozen=True)
class SeparationReport:
    margins: Tuple[SeparationMargin, ...]

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.margins)

    def rows(self) -> List[Dict[str, Any]]:
        return [asdict(m) for m in self.margins]


def separation_check(fam: HardCaseFamily) -> SeparationReport:
    """
    Plan every hypothesis and confirm its best action at the decision states.

    M1 keeps a_1 best everywhere with a runner-up gap of exactly 2ε (when a
    second window action exists); M_{k,l} prefers a_l at x_k by at least 2ε.
    """
    eps = fam.params.eps
    K, L = fam.params.K, fam.params.L
    margins = []

    _, q, _ = value_iteration(fam.hypothesis_m1, tol=SEPARATION_TOL)
    for k in range(K):
        row = q.values[k, :L]
        best = int(np.argmax(row))
        if L > 1:
            runner_up = float(row[best] - np.max(np.delete(row, best)))
        else:
            runner_up = math.inf
        if fam.derived.Lk[k] >= 2:
            gap_ok = abs(runner_up - 2.0 * eps) <= RUNNER_UP_TOL
        else:
            gap_ok = runner_up >= 2.0 * eps - RUNNER_UP_TOL
        margins.append(SeparationMargin("M1", k, best, 0, runner_up, best == 0 and gap_ok))

    for k, l, m in fam.hypotheses_kl:
        _, q, _ = value_iteration(m, tol=SEPARATION_TOL)
        row = q.values[k, :L]
        best = int(np.argmax(row))
        margin = float(row[l] - row[0])
        margins.append(
            SeparationMargin(f"M_{k + 1},{l + 1}", k, best, l, margin, best == l and margin >= 2.0 * eps)
        )

    report = SeparationReport(margins=tuple(margins))
    if not report.passed:
        logger.warning("separation check failed for at least one hypothesis")
    return report


def threshold_report(fam: HardCaseFamily) -> List[Dict[str, Any]]:
    """
    Per decision state, candidate-set sizes at the upper threshold and at
    both forms of the lower threshold, and whether the bounds meet.
    """
    _, q0, _ = value_iteration(fam.prior, tol=SEPARATION_TOL)
    d = fam.derived
    upper = candidate_set(q0, d.c_bar)
    rows = []
    for k in range(fam.params.K):
        lower = candidate_set(q0, d.c_lower[k]).sets[k]
        direct = candidate_set(q0, d.c_lower_direct[k]).sets[k]
        rows.append({
            "k": k,
            "Lk": d.Lk[k],
            "size_upper": len(upper.sets[k]),
            "size_lower": len(lower),
            "size_lower_direct": len(direct),
            "lower_forms_agree": lower == direct,
            "bounds_meet": upper.sets[k] == lower,
        })
    return rows


def write_manifest(fam: HardCaseFamily, out_dir: Union[str, Path]) -> Path:
    """Write the prior, every hypothesis and a JSON manifest into ``out_dir``"""
    from app.utils.mdp_io import dump_mdp

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"prior": "prior.json"}
    dump_mdp(fam.prior, out_dir / "prior.json")
    for label, m in fam.hypotheses():
        name = label.replace(",", "_") + ".json"
        dump_mdp(m, out_dir / name)
        files[label] = name
    manifest = {
        "params": fam.params.model_dump(),
        "derived": fam.derived.as_dict(),
        "files": files,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    logger.info(f"wrote hard-case manifest to {path}")
    return path


CURVE_COLUMNS = [
    "beta", "gamma", "eps", "eps0", "c_bar", "c_lower", "c_lower_direct",
    "gamma_valid", "eps_valid", "p0k_branch", "c_bar_branch", "lower_case",
]


def lower_bound_curves(
    betas: Sequence[float],
    gammas: Sequence[float],
    eps_values: Optional[Sequence[float]] = None,
    eps_ratio: float = 0.5,
) -> List[Dict[str, Any]]:
    """
    Closed-form quantities over a β × γ (× ε) grid.

    The leading prior probability of each cell is chosen so that
    p0k = (4γ-1)/(3γ). ε defaults to ``eps_ratio`` times the cell's ε0.
    Out-of-domain cells are flagged and carry NaN quantities.

    Returns:
        One row per cell with the keys in CURVE_COLUMNS
    """
    if not 0.0 < eps_ratio < 1.0:
        raise ValueError(f"eps_ratio must lie in (0, 1), got {eps_ratio}")
    rows = []
    for beta in betas:
        for gamma in gammas:
            for eps in (eps_values if eps_values is not None else [None]):
                rows.append(_curve_cell(float(beta), float(gamma), eps, eps_ratio))
    invalid = sum(1 for r in rows if not (r["gamma_valid"] and r["eps_valid"]))
    logger.info(f"evaluated {len(rows)} grid cells ({invalid} outside the domain)")
    return rows


def _curve_cell(beta: float, gamma: float, eps: Optional[float], eps_ratio: float) -> Dict[str, Any]:
    nan = float("nan")
    low, high = hardcase_gamma_range(beta)
    row: Dict[str, Any] = {
        "beta": beta,
        "gamma": gamma,
        "eps": nan if eps is None else float(eps),
        "eps0": nan,
        "c_bar": nan,
        "c_lower": nan,
        "c_lower_direct": nan,
        "gamma_valid": low < gamma < high and 0.0 < beta < 2.0,
        "eps_valid": False,
        "p0k_branch": "",
        "c_bar_branch": "",
        "lower_case": 0,
    }
    if not row["gamma_valid"]:
        return row

    floor = hardcase_p0_floor(gamma)
    leading = floor + min(beta / 2.0, 1.0 - floor) / 2.0
    row["eps0"] = eps0_value([p0k_value(leading, beta, gamma)], beta, gamma)
    if eps is None:
        row["eps"] = eps_ratio * row["eps0"]
    row["p0k_branch"] = "shifted" if floor + beta / 2.0 < 1.0 else "floor"
    row["c_bar_branch"] = "horizon" if beta >= 1.0 - gamma else "radius"
    try:
        params = HardCaseParams(beta=beta, gamma=gamma, eps=row["eps"], p0=[[leading]])
        derived = derive_params(params)
    except ParameterDomainError as e:
        logger.debug(f"cell beta={beta}, gamma={gamma}: {e}")
        return row
    row.update(
        eps_valid=True,
        c_bar=derived.c_bar,
        c_lower=derived.c_lower[0],
        c_lower_direct=derived.c_lower_direct[0],
        lower_case=derived.lower_case,
    )
    return row


def inflate_alpha2(derived: HardCaseDerived, alpha2: Sequence[float]) -> HardCaseDerived:
    """Copy of ``derived`` with α2 replaced, for building off-construction families"""
    return replace(derived, alpha2=tuple(float(a) for a in alpha2))
