"""
Experiment runners behind ``transfer-mdp run``.

Each runner fans its seeded trials out over a process pool, writes one
CSV per figure panel plus SVG charts, and returns acceptance criteria
that can be recomputed from the CSVs alone.
"""

import logging
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.stats import pearsonr

from agents.empirical_model import full_action_sets, learn_from_scratch, samples_per_pair
from agents.q_learning import default_schedule, q_learning
from app.models.configs import (ExperimentConfig, HardCaseParams, LearnerConfig,
                                SailingInstance, TransferConfig, hardcase_gamma_range)
from app.models.mdp import QFunction
from app.services.convexhull import (coefficients_from_stacked, estimate_coefficients,
                                     exact_stacked, hull_gap_bound, hull_transfer,
                                     mix_bases, select_anchor_pairs)
from app.services.hardcase import (CURVE_COLUMNS, build_family, lower_bound_curves,
                                   separation_check, threshold_report,
                                   verify_ball_membership)
from app.services.instances import (INSTANCE_BUILDERS, random_hull, random_mdp,
                                    random_simplex_point)
from app.services.planning import (is_eps_optimal, perturb_within_ball,
                                   policy_evaluation_exact, tv_distance,
                                   value_iteration)
from app.services.sailing import make_sailing
from app.services.sampling import GenerativeModel
from app.services.transfer import (outcome_summary, prior_candidate_sets,
                                   transfer_learn)
from app.utils.charts import write_line_chart
from app.utils.errors import ExperimentConfigError, TransferMdpError
from app.utils.mdp_io import load_mdp
from app.utils.output import write_csv, write_json
from config.experiments import get_experiment_defaults
from config.settings import get_settings

logger = logging.getLogger("experiments")

DIRECT_TRANSFER_TOL = 1e-6
THRESHOLD_SLACK = 1e-12
NOISE_FREE_TOL = 1e-9
NOISE_FREE_MIN_LAMBDA = 1e-8


@dataclass
class Criterion:
    """One acceptance check: ``value`` compared against ``threshold``"""

    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class ExperimentSummary:
    name: str
    kind: str
    output_dir: Path
    criteria: List[Criterion] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)
    n_trials: int = 0
    n_errors: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "passed": self.passed,
            "n_trials": self.n_trials,
            "n_errors": self.n_errors,
            "criteria": {c.name: asdict(c) for c in self.criteria},
            "files": sorted(p.name for p in self.files),
        }


def _at_least(name: str, value: float, threshold: float) -> Criterion:
    return Criterion(name, float(value), float(threshold), bool(value >= threshold))


def _at_most(name: str, value: float, threshold: float) -> Criterion:
    return Criterion(name, float(value), float(threshold), bool(value <= threshold))


# config loading

def experiment_config_from_dict(raw: Dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Merge ``raw`` over the defaults of its kind and validate it.

    Raises:
        ExperimentConfigError: Naming the first invalid field
    """
    kind = raw.get("kind")
    defaults = get_experiment_defaults(kind) if isinstance(kind, str) else None
    if defaults is None:
        raise ExperimentConfigError("kind", f"unknown experiment kind {kind!r}")
    unknown = set(raw.get("params", {})) - set(defaults["params"]) - {"prior_file"}
    if unknown:
        raise ExperimentConfigError(f"params.{sorted(unknown)[0]}", "unknown parameter")

    merged = dict(raw)
    merged["params"] = {**defaults["params"], **raw.get("params", {})}
    merged["acceptance"] = {**defaults["acceptance"], **raw.get("acceptance", {})}
    env_dir = os.getenv("TRANSFER_MDP_OUTPUT_DIR")
    if env_dir:
        merged["output_dir"] = env_dir
    try:
        cfg = ExperimentConfig(**merged)
    except ValidationError as e:
        error = e.errors()[0]
        name = ".".join(str(part) for part in error["loc"]) or "config"
        raise ExperimentConfigError(name, error["msg"]) from e

    prior_file = cfg.params.get("prior_file")
    if prior_file is not None:
        path = Path(prior_file)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ExperimentConfigError("params.prior_file", f"{path} does not exist")
        cfg.params["prior_file"] = str(path)
    if cfg.kind == "transfer-sweep":
        instance = cfg.params["instance"]
        if instance != "file" and instance not in INSTANCE_BUILDERS:
            raise ExperimentConfigError("params.instance", f"unknown instance kind {instance!r}")
        if instance == "file" and prior_file is None:
            raise ExperimentConfigError("params.prior_file", "required when instance = 'file'")
    return cfg


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a TOML experiment file; relative file references resolve against its directory"""
    path = Path(path)
    if not path.exists():
        raise ExperimentConfigError("path", f"{path} does not exist")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ExperimentConfigError("toml", str(e)) from e
    return experiment_config_from_dict(raw, base_dir=path.parent)


def _map_trials(fn: Callable[[Dict[str, Any]], Any], jobs: List[Dict[str, Any]], workers: int) -> List[Any]:
    """Run trials in order; more than one worker fans out over processes"""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# transfer-sweep

TRANSFER_COLUMNS = [
    "seed", "budget_scale", "beta", "gamma", "eps", "delta", "c_bar", "candidate_sizes",
    "n_bar", "n_available", "s_prime_size", "samples_per_pair", "samples", "samples_s_prime",
    "audit_ok", "eliminated_fraction", "upper_bound_order", "scratch_samples_per_pair",
    "scratch_samples", "scratch_success", "full_candidate_sets", "direct_transfer_gap",
    "success", "error",
]


def _transfer_pair(params: Dict[str, Any], seed: int):
    beta = params["beta"]
    if params["instance"] == "file":
        prior = load_mdp(params["prior_file"])
    else:
        prior = INSTANCE_BUILDERS[params["instance"]](seed=seed, **params["instance_args"])
    return prior, perturb_within_ball(prior, beta, rng_seed=seed + 1)


def _transfer_trial(job: Dict[str, Any]) -> Dict[str, Any]:
    params, seed, scale = job["params"], job["seed"], job["budget_scale"]
    row: Dict[str, Any] = {"seed": seed, "budget_scale": scale, "error": "", "success": False}
    try:
        prior, truth = _transfer_pair(params, seed)
        cfg = TransferConfig(
            beta=params["beta"],
            eps=params["eps"],
            delta=params["delta"],
            budget_scale=scale,
            samples_per_pair=params["samples_per_pair"],
            threshold_variant=params["threshold_variant"],
        )
        v_star, _, _ = value_iteration(truth)
        outcome = transfer_learn(prior, GenerativeModel(truth, seed=seed), cfg)
        row.update(outcome_summary(outcome, cfg, prior.gamma))
        row["success"] = bool(is_eps_optimal(truth, outcome.policy, cfg.eps, v_star=v_star))
        row.update(
            n_available=sum(len(prior.actions_per_state[s]) for s in prior.s_prime),
            s_prime_size=len(prior.s_prime),
            audit_ok=outcome.audit_ok,
            full_candidate_sets=outcome.candidate_sets.sets == prior.actions_per_state,
        )

        _, _, prior_policy = value_iteration(prior)
        row["direct_transfer_gap"] = is_eps_optimal(truth, prior_policy, cfg.eps, v_star=v_star).worst_gap

        scratch_gm = GenerativeModel(truth, seed=seed)
        full_sets = full_action_sets(scratch_gm)
        n_scratch = samples_per_pair(full_sets, truth.gamma, cfg.learner_config())
        row["scratch_samples_per_pair"] = n_scratch
        row["scratch_samples"] = n_scratch * full_sets.full_count
        if params["scratch"]:
            policy = learn_from_scratch(scratch_gm, cfg.learner_config())
            row["scratch_success"] = bool(is_eps_optimal(truth, policy, cfg.eps, v_star=v_star))
    except (TransferMdpError, ValidationError) as e:
        logger.error(f"transfer trial seed={seed} scale={scale} aborted: {e}")
        row["error"] = str(e).replace("\n", " ")
    return row


def run_transfer_sweep(cfg: ExperimentConfig, out_dir: Path, workers: int) -> ExperimentSummary:
    params = cfg.params
    jobs = [
        {"params": params, "seed": seed, "budget_scale": scale}
        for scale in cfg.budget_scales
        for seed in cfg.seeds
    ]
    rows = _map_trials(_transfer_trial, jobs, workers)
    summary = ExperimentSummary(cfg.name, cfg.kind, out_dir, n_trials=len(rows))
    summary.n_errors = sum(1 for r in rows if r["error"])
    summary.files.append(write_csv(out_dir / "trials.csv", rows, TRANSFER_COLUMNS))

    by_scale = []
    for scale in cfg.budget_scales:
        chunk = [r for r in rows if r["budget_scale"] == scale]
        by_scale.append({
            "budget_scale": scale,
            "success_rate": float(np.mean([r["success"] for r in chunk])),
            "mean_samples": float(np.mean([r.get("samples", 0) for r in chunk])),
            "mean_scratch_samples": float(np.mean([r.get("scratch_samples", 0) for r in chunk])),
        })
    summary.files.append(write_csv(out_dir / "success_by_scale.csv", by_scale))
    summary.files.append(write_line_chart(
        out_dir / "samples_by_scale.svg",
        {
            "transfer": [(r["budget_scale"], r["mean_samples"]) for r in by_scale],
            "from scratch": [(r["budget_scale"], r["mean_scratch_samples"]) for r in by_scale],
        },
        title=cfg.name,
        x_label="budget scale",
        y_label="samples",
        dashed=["from scratch"],
    ))

    ok = [r for r in rows if not r["error"]]
    acceptance = cfg.acceptance
    # every budget scale has to reach the success rate on its own
    criteria = [_at_most("errors", summary.n_errors, 0)]
    for entry in by_scale:
        criteria.append(_at_least(
            f"success_rate_{entry['budget_scale']:g}", entry["success_rate"], acceptance.get("min_success_rate", 0.0)
        ))
    criteria.append(_at_least("audit_rate", np.mean([r.get("audit_ok", False) for r in rows]), 1.0))
    if "max_kept_fraction" in acceptance and ok:
        kept = max(r["n_bar"] / r["n_available"] if r["n_available"] else 0.0 for r in ok)
        criteria.append(_at_most("kept_fraction", kept, acceptance["max_kept_fraction"]))
    if acceptance.get("n_bar_equals_s_prime") and ok:
        matches = np.mean([r["n_bar"] == r["s_prime_size"] for r in ok])
        criteria.append(_at_least("n_bar_equals_s_prime", matches, 1.0))
    if acceptance.get("direct_transfer_optimal") and ok:
        worst = max(r["direct_transfer_gap"] for r in ok)
        criteria.append(_at_most("direct_transfer_gap", worst, DIRECT_TRANSFER_TOL))
    if acceptance.get("full_candidate_sets") and ok:
        criteria.append(_at_least("full_candidate_sets", np.mean([r["full_candidate_sets"] for r in ok]), 1.0))
    summary.criteria = criteria
    return summary


# hardcase-figures

CHECK_COLUMNS = [
    "instance", "beta", "gamma", "eps", "K", "L", "p0k", "eps0", "alpha1", "alpha2", "Lk",
    "c_lower", "c_lower_direct", "c_bar", "n_hypotheses", "ball_ok", "separation_ok",
    "min_kl_margin", "lk_agree", "expected_ok", "error",
]


def _grid(spec: Union[Sequence[float], Dict[str, Any]], name: str) -> List[float]:
    if isinstance(spec, dict):
        try:
            return [float(x) for x in np.linspace(spec["start"], spec["stop"], int(spec["num"]))]
        except KeyError as e:
            raise ExperimentConfigError(f"params.{name}", f"grid needs start, stop and num (missing {e})") from e
    return [float(x) for x in spec]


def _matches_expected(derived, expected: Dict[str, Any]) -> bool:
    for key, want in expected.items():
        got = getattr(derived, key)
        if isinstance(got, tuple):
            got = list(got)
        if isinstance(want, list):
            if len(want) != len(got) or not all(math.isclose(g, w, rel_tol=1e-3) for g, w in zip(got, want)):
                return False
        elif isinstance(got, list):
            if not math.isclose(got[0], want, rel_tol=1e-3):
                return False
        elif not math.isclose(got, want, rel_tol=1e-3):
            return False
    return True


def _hardcase_instance(index: int, spec: Dict[str, Any]) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    row: Dict[str, Any] = {"instance": index, "error": ""}
    spec = dict(spec)
    expected = spec.pop("expected", {})
    try:
        params = HardCaseParams(**spec)
        fam = build_family(params)
        d = fam.derived
        separation = separation_check(fam)
        thresholds = threshold_report(fam)
        kl = [m.margin for m in separation.margins if m.hypothesis != "M1"]
        row.update(
            beta=params.beta, gamma=params.gamma, eps=params.eps, K=params.K, L=params.L,
            p0k=d.p0k[0], eps0=d.eps0, alpha1=d.alpha1[0], alpha2=d.alpha2[0],
            Lk=" ".join(str(n) for n in d.Lk), c_lower=d.c_lower[0],
            c_lower_direct=d.c_lower_direct[0], c_bar=d.c_bar, n_hypotheses=fam.n_hypotheses,
            ball_ok=verify_ball_membership(fam), separation_ok=separation.passed,
            min_kl_margin=min(kl) if kl else float("nan"),
            lk_agree=all(t["lower_forms_agree"] and t["size_lower"] == t["Lk"] for t in thresholds),
            expected_ok=_matches_expected(d, expected),
        )
        margins = [{"instance": index, **m} for m in separation.rows()]
    except (TransferMdpError, ValidationError) as e:
        logger.error(f"hard-case instance {index} aborted: {e}")
        row["error"] = str(e).replace("\n", " ")
        margins = []
    return row, margins


def run_hardcase_figures(cfg: ExperimentConfig, out_dir: Path, workers: int) -> ExperimentSummary:
    params = cfg.params
    betas = _grid(params["betas"], "betas")
    gamma_points = int(params["gamma_points"])
    rows: List[Dict[str, Any]] = []
    if gamma_points > 0:
        # per-β grid strictly inside the admissible discount range
        for beta in betas:
            low, high = hardcase_gamma_range(beta)
            gammas = [low + (high - low) * i / (gamma_points + 1) for i in range(1, gamma_points + 1)]
            for i, row in enumerate(lower_bound_curves([beta], gammas, eps_ratio=params["eps_ratio"])):
                rows.append({**row, "series": i})
    else:
        gammas = _grid(params["gammas"], "gammas")
        for row in lower_bound_curves(betas, gammas, eps_ratio=params["eps_ratio"]):
            rows.append({**row, "series": gammas.index(row["gamma"])})

    summary = ExperimentSummary(cfg.name, cfg.kind, out_dir)
    summary.files.append(write_csv(out_dir / "curves.csv", rows, CURVE_COLUMNS + ["series"]))

    valid = [r for r in rows if r["gamma_valid"] and r["eps_valid"]]
    series_ids = sorted({r["series"] for r in rows})
    label = "gamma index" if gamma_points > 0 else "gamma"

    def name(i: int) -> str:
        return f"{label} {i}" if gamma_points > 0 else f"gamma={gammas[i]:g}"

    summary.files.append(write_line_chart(
        out_dir / "eps0.svg",
        {name(i): [(r["beta"], r["eps0"]) for r in valid if r["series"] == i] for i in series_ids},
        title=f"{cfg.name}: eps0", x_label="beta", y_label="eps0",
    ))
    threshold_series: Dict[str, List[Tuple[float, float]]] = {}
    for i in series_ids:
        threshold_series[f"C_bar {name(i)}"] = [(r["beta"], r["c_bar"]) for r in valid if r["series"] == i]
        threshold_series[f"C_lower {name(i)}"] = [(r["beta"], r["c_lower"]) for r in valid if r["series"] == i]
    summary.files.append(write_line_chart(
        out_dir / "thresholds.svg", threshold_series,
        title=f"{cfg.name}: thresholds", x_label="beta", y_label="threshold",
        dashed=[k for k in threshold_series if k.startswith("C_lower")],
    ))

    violations = sum(1 for r in rows if not (r["gamma_valid"] and r["eps_valid"]))
    crossings = sum(1 for r in valid if r["c_lower"] > r["c_bar"] + THRESHOLD_SLACK)
    criteria = [
        _at_most("domain_violations", violations, cfg.acceptance.get("max_domain_violations", 0)),
        _at_most("c_lower_above_c_bar", crossings, 0),
    ]
    if gamma_points == 0:
        correlations = []
        for i in series_ids:
            cells = [r for r in valid if r["series"] == i]
            if len(cells) >= 3:
                correlations.append(pearsonr([r["beta"] for r in cells], [r["eps0"] for r in cells])[0])
        if correlations:
            criteria.append(_at_least(
                "eps0_correlation", min(correlations), cfg.acceptance.get("min_eps0_correlation", 0.0)
            ))

    instances = params["instances"]
    if instances:
        checked = [_hardcase_instance(i, spec) for i, spec in enumerate(instances)]
        check_rows = [row for row, _ in checked]
        margin_rows = [m for _, margins in checked for m in margins]
        summary.files.append(write_csv(out_dir / "hardcase_checks.csv", check_rows, CHECK_COLUMNS))
        summary.files.append(write_csv(
            out_dir / "separation.csv", margin_rows,
            ["instance", "hypothesis", "k", "best_action", "expected_action", "margin", "passed"],
        ))
        passed = [
            not r["error"] and r["ball_ok"] and r["separation_ok"] and r["lk_agree"] and r["expected_ok"]
            for r in check_rows
        ]
        criteria.append(_at_least("hardcase_checks", float(np.mean(passed)), 1.0))
        summary.n_errors = sum(1 for r in check_rows if r["error"])

    summary.n_trials = len(rows) + len(instances)
    summary.criteria = criteria
    return summary


# warmstart

CURVE_CSV_COLUMNS = ["seed", "sweep", "samples_used", "min_value", "mean_value"]


def _warmstart_trial(job: Dict[str, Any]) -> Dict[str, Any]:
    params, seed = job["params"], job["seed"]
    result: Dict[str, Any] = {"seed": seed, "error": "", "warm": [], "scratch": []}
    try:
        inst = SailingInstance(**params["sailing"])
        prior = make_sailing(inst, seed=params["instance_seed"])
        truth = perturb_within_ball(prior, params["beta"], rng_seed=seed)
        _, q0, _ = value_iteration(prior)
        cfg = LearnerConfig(eps=params["eps"], max_iters=params["max_iters"], step_h=params["step_h"])
        schedule = default_schedule(cfg.max_iters, params["n_points"])
        v_star, _, _ = value_iteration(truth)

        # both runs draw the same sample batch: same seed, same sweep order
        warm_curve, warm_q = q_learning(GenerativeModel(truth, seed=seed), q0, cfg, schedule, eval_mdp=truth)
        scratch_curve, scratch_q = q_learning(
            GenerativeModel(truth, seed=seed), QFunction.zeros(truth), cfg, schedule, eval_mdp=truth
        )
        tolerance = 2.0 * params["eps"]
        result.update(
            warm=[(seed, p.sweep, p.samples_used, p.min_value, p.mean_value) for p in warm_curve.points],
            scratch=[(seed, p.sweep, p.samples_used, p.min_value, p.mean_value) for p in scratch_curve.points],
            warm_first=warm_curve.first.mean_value,
            scratch_first=scratch_curve.first.mean_value,
            warm_final_gap=is_eps_optimal(truth, warm_q.greedy(), tolerance, v_star=v_star).worst_gap,
            scratch_final_gap=is_eps_optimal(truth, scratch_q.greedy(), tolerance, v_star=v_star).worst_gap,
            v_star_mean=float(v_star.values.mean()),
        )
    except (TransferMdpError, ValidationError) as e:
        logger.error(f"warm-start trial seed={seed} aborted: {e}")
        result["error"] = str(e).replace("\n", " ")
    return result


def _mean_curve(points: List[Tuple], column: int) -> List[Tuple[float, float]]:
    by_samples: Dict[int, List[float]] = {}
    for point in points:
        by_samples.setdefault(point[2], []).append(point[column])
    return [(float(k), float(np.mean(v))) for k, v in sorted(by_samples.items())]


def run_warmstart(cfg: ExperimentConfig, out_dir: Path, workers: int) -> ExperimentSummary:
    jobs = [{"params": cfg.params, "seed": seed} for seed in cfg.seeds]
    results = _map_trials(_warmstart_trial, jobs, workers)
    summary = ExperimentSummary(cfg.name, cfg.kind, out_dir, n_trials=len(results))
    summary.n_errors = sum(1 for r in results if r["error"])

    warm_points = [p for r in results for p in r["warm"]]
    scratch_points = [p for r in results for p in r["scratch"]]
    summary.files.append(write_csv(out_dir / "curve_warm.csv", [dict(zip(CURVE_CSV_COLUMNS, p)) for p in warm_points], CURVE_CSV_COLUMNS))
    summary.files.append(write_csv(out_dir / "curve_scratch.csv", [dict(zip(CURVE_CSV_COLUMNS, p)) for p in scratch_points], CURVE_CSV_COLUMNS))
    trial_columns = ["seed", "warm_first", "scratch_first", "warm_final_gap", "scratch_final_gap", "v_star_mean", "error"]
    summary.files.append(write_csv(out_dir / "trials.csv", results, trial_columns))
    summary.files.append(write_line_chart(
        out_dir / "learning_curves.svg",
        {"warm start": _mean_curve(warm_points, 4), "from scratch": _mean_curve(scratch_points, 4)},
        title=cfg.name, x_label="samples", y_label="mean greedy-policy value",
        dashed=["from scratch"],
    ))

    ok = [r for r in results if not r["error"]]
    jumpstart = np.mean([r["warm_first"] > r["scratch_first"] for r in ok]) if ok else 0.0
    criteria = [
        _at_most("errors", summary.n_errors, 0),
        _at_least("jumpstart_rate", jumpstart, cfg.acceptance.get("min_jumpstart_rate", 0.0)),
    ]
    if "min_final_rate" in cfg.acceptance:
        tolerance = 2.0 * cfg.params["eps"]
        final = np.mean([
            r["warm_final_gap"] <= tolerance and r["scratch_final_gap"] <= tolerance for r in ok
        ]) if ok else 0.0
        criteria.append(_at_least("final_rate", final, cfg.acceptance["min_final_rate"]))
    summary.criteria = criteria
    return summary


# hull-sweep

def _hull_instance(params: Dict[str, Any]):
    bases = random_hull(params["K"], params["n_states"], params["n_actions"], params["gamma"], params["hull_seed"])
    hull = select_anchor_pairs(bases)
    truth = random_simplex_point(params["K"], params["hull_seed"] + 1)
    return hull, truth, mix_bases(bases, truth)


def _hull_trial(job: Dict[str, Any]) -> Dict[str, Any]:
    params, seed = job["params"], job["seed"]
    result: Dict[str, Any] = {"seed": seed, "error": "", "errors": []}
    try:
        hull, truth, target = _hull_instance(params)
        for n in params["sample_sizes"]:
            estimate, _ = estimate_coefficients(hull, GenerativeModel(target, seed=seed), int(n), seed=seed)
            result["errors"].append({"seed": seed, "n_samples": int(n), "error": estimate.distance(truth)})

        eps, gamma = params["eps"], params["gamma"]
        # bound_samples = None falls back to scale x the theoretical count
        bound_samples = params["bound_samples"]
        outcome = hull_transfer(
            hull, GenerativeModel(target, seed=seed), eps, params["delta"], scale=params["scale"], seed=seed,
            n_samples=None if bound_samples is None else int(bound_samples),
        )
        tol = get_settings().planning_tol
        v_star, _, _ = value_iteration(target, tol=tol)
        gap = is_eps_optimal(target, outcome.policy, eps, v_star=v_star).worst_gap
        alpha = outcome.coefficients.distance(truth)
        bound = hull_gap_bound(eps / 2.0, alpha, hull.K, gamma)
        result["gap_bound"] = {
            "seed": seed,
            "n_samples": outcome.n_samples,
            "theoretical_samples": outcome.theoretical_samples,
            "alpha": alpha,
            "gap": gap,
            "bound": bound,
            "holds": gap <= bound + 2.0 * tol,
        }
    except TransferMdpError as e:
        logger.error(f"hull trial seed={seed} aborted: {e}")
        result["error"] = str(e)
    return result


def noise_free_recovery(params: Dict[str, Any], n_points: int) -> List[Dict[str, Any]]:
    """Recover random simplex points from exact stacked rows"""
    hulls = {}
    rows = []
    for i in range(n_points):
        K = int(params["noise_free_K"][i % len(params["noise_free_K"])])
        if K not in hulls:
            bases = random_hull(K, params["n_states"], params["n_actions"], params["gamma"], params["hull_seed"] + 100 + K)
            hulls[K] = select_anchor_pairs(bases)
        hull = hulls[K]
        truth = random_simplex_point(K, seed=i)
        estimate = coefficients_from_stacked(hull, exact_stacked(hull, mix_bases(hull.bases, truth)))
        rows.append({"point": i, "K": K, "lambda_min": hull.lambda_min, "error": estimate.distance(truth)})
    return rows


def run_hull_sweep(cfg: ExperimentConfig, out_dir: Path, workers: int) -> ExperimentSummary:
    params = cfg.params
    results = _map_trials(_hull_trial, [{"params": params, "seed": seed} for seed in cfg.seeds], workers)
    summary = ExperimentSummary(cfg.name, cfg.kind, out_dir, n_trials=len(results))
    summary.n_errors = sum(1 for r in results if r["error"])

    error_rows = [e for r in results for e in r["errors"]]
    bound_rows = [r["gap_bound"] for r in results if "gap_bound" in r]
    summary.files.append(write_csv(out_dir / "coefficient_errors.csv", error_rows, ["seed", "n_samples", "error"]))
    summary.files.append(write_csv(
        out_dir / "gap_bound.csv", bound_rows,
        ["seed", "n_samples", "theoretical_samples", "alpha", "gap", "bound", "holds"],
    ))

    sizes = [int(n) for n in params["sample_sizes"]]
    medians = [float(np.median([e["error"] for e in error_rows if e["n_samples"] == n])) if error_rows else float("nan") for n in sizes]
    summary.files.append(write_csv(
        out_dir / "median_errors.csv",
        [{"n_samples": n, "median_error": m} for n, m in zip(sizes, medians)],
    ))
    summary.files.append(write_line_chart(
        out_dir / "median_errors.svg", {"median error": list(zip(sizes, medians))},
        title=cfg.name, x_label="anchor samples", y_label="median coefficient error",
    ))

    criteria = [_at_most("errors", summary.n_errors, 0)]
    low, high = cfg.acceptance.get("ratio_low", 0.0), cfg.acceptance.get("ratio_high", math.inf)
    for (n0, m0), (n1, m1) in zip(zip(sizes, medians), zip(sizes[1:], medians[1:])):
        ratio = m1 / m0 if m0 > 0 else float("nan")
        criteria.append(Criterion(f"median_ratio_{n0}_{n1}", ratio, low, bool(low <= ratio <= high)))
    if bound_rows:
        criteria.append(_at_least("gap_bound_rate", np.mean([r["holds"] for r in bound_rows]), 1.0))

    n_points = int(params["noise_free_points"])
    if n_points > 0:
        recovery = noise_free_recovery(params, n_points)
        summary.files.append(write_csv(out_dir / "noise_free.csv", recovery, ["point", "K", "lambda_min", "error"]))
        checked = [r["error"] for r in recovery if r["lambda_min"] > NOISE_FREE_MIN_LAMBDA]
        criteria.append(_at_most("noise_free_error", max(checked) if checked else 0.0, NOISE_FREE_TOL))
    summary.criteria = criteria
    return summary


# bound-sweep

BOUND_COLUMNS = [
    "seed", "pair", "n_states", "n_actions", "gamma", "beta", "tv", "q_gap", "q_bound", "q_bound_ok",
    "value_gap", "value_bound", "value_bound_ok", "c_bar", "kept", "shortfall", "margin", "sound", "error",
]


def _bound_trial(job: Dict[str, Any]) -> Dict[str, Any]:
    """
    One random (prior, truth) pair: the optimal-Q gap, the value gap of the
    prior's optimal policy, and whether the strict candidate sets keep a
    near-optimal action of the truth at every state.
    """
    params, seed, index = job["params"], job["seed"], job["index"]
    row: Dict[str, Any] = {"seed": seed, "pair": index, "error": ""}
    try:
        rng = np.random.default_rng([seed, index])
        n_states = int(rng.integers(2, int(params["max_states"]) + 1))
        n_actions = int(rng.integers(2, int(params["max_actions"]) + 1))
        gammas, betas = params["gammas"], params["betas"]
        gamma = float(gammas[index % len(gammas)])
        beta = float(betas[(index // len(gammas)) % len(betas)])
        prior = random_mdp(n_states, n_actions, gamma, seed=int(rng.integers(2 ** 31)), variable_actions=True)
        truth = perturb_within_ball(prior, beta, rng_seed=int(rng.integers(2 ** 31)))

        tol = get_settings().planning_tol
        _, q0, prior_policy = value_iteration(prior, tol=tol)
        v_star, q_star, _ = value_iteration(truth, tol=tol)
        mask = prior.mask
        q_gap = float(np.max(np.abs(q0.values[mask] - q_star.values[mask])))
        q_bound = min(prior.v_max, beta / (1.0 - gamma) ** 2) + 2.0 * tol
        value_gap = float(np.max(np.abs(
            policy_evaluation_exact(prior, prior_policy).values - policy_evaluation_exact(truth, prior_policy).values
        )))
        value_bound = min(prior.v_max, 2.0 * beta / (1.0 - gamma) ** 2) + 2.0 * tol

        sets = prior_candidate_sets(prior, TransferConfig(beta=beta, eps=params["eps"], threshold_variant="strict"), q0=q0)
        best_kept = np.array([max(q_star.values[s, a] for a in acts) for s, acts in enumerate(sets.sets)])
        shortfall = float(np.max(v_star.values - best_kept))
        margin = params["eps"] * (1.0 - gamma)
        row.update(
            n_states=n_states, n_actions=n_actions, gamma=gamma, beta=beta, tv=tv_distance(prior, truth),
            q_gap=q_gap, q_bound=q_bound, q_bound_ok=q_gap <= q_bound,
            value_gap=value_gap, value_bound=value_bound, value_bound_ok=value_gap <= value_bound,
            c_bar=sets.threshold, kept=sets.full_count, shortfall=shortfall, margin=margin,
            sound=shortfall <= margin + 2.0 * tol,
        )
    except (TransferMdpError, ValidationError) as e:
        logger.error(f"bound trial seed={seed} pair={index} aborted: {e}")
        row["error"] = str(e).replace("\n", " ")
    return row


def run_bound_sweep(cfg: ExperimentConfig, out_dir: Path, workers: int) -> ExperimentSummary:
    params = cfg.params
    jobs = [
        {"params": params, "seed": seed, "index": i}
        for seed in cfg.seeds
        for i in range(int(params["n_pairs"]))
    ]
    rows = _map_trials(_bound_trial, jobs, workers)
    summary = ExperimentSummary(cfg.name, cfg.kind, out_dir, n_trials=len(rows))
    summary.n_errors = sum(1 for r in rows if r["error"])
    summary.files.append(write_csv(out_dir / "pairs.csv", rows, BOUND_COLUMNS))

    ok = [r for r in rows if not r["error"]]
    series: Dict[str, List[Tuple[float, float]]] = {}
    for gamma in params["gammas"]:
        for beta in params["betas"]:
            ratios = sorted(r["q_gap"] / r["q_bound"] for r in ok if r["gamma"] == gamma and r["beta"] == beta)
            series[f"gamma={gamma:g} beta={beta:g}"] = [(i / max(1, len(ratios) - 1), x) for i, x in enumerate(ratios)]
    summary.files.append(write_line_chart(
        out_dir / "q_gap_ratio.svg", series,
        title=f"{cfg.name}: optimal-Q gap over its bound", x_label="pair quantile", y_label="gap / bound",
    ))

    acceptance = cfg.acceptance

    def rate(key: str) -> float:
        return float(np.mean([r[key] for r in ok])) if ok else 0.0

    summary.criteria = [
        _at_most("errors", summary.n_errors, 0),
        _at_least("q_bound_rate", rate("q_bound_ok"), acceptance.get("min_q_bound_rate", 1.0)),
        _at_least("value_bound_rate", rate("value_bound_ok"), acceptance.get("min_value_bound_rate", 1.0)),
        _at_least("soundness_rate", rate("sound"), acceptance.get("min_soundness_rate", 1.0)),
    ]
    return summary


EXPERIMENT_RUNNERS = {
    "transfer-sweep": run_transfer_sweep,
    "hardcase-figures": run_hardcase_figures,
    "warmstart": run_warmstart,
    "hull-sweep": run_hull_sweep,
    "bound-sweep": run_bound_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """
    Run one experiment and write its CSVs, charts and ``summary.json``.

    Args:
        cfg: Validated experiment config

    Returns:
        ExperimentSummary with per-criterion pass/fail
    """
    runner = EXPERIMENT_RUNNERS.get(cfg.kind)
    if runner is None:
        raise ExperimentConfigError("kind", f"unknown experiment kind {cfg.kind!r}")
    out_dir = Path(cfg.output_dir) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers or get_settings().workers
    logger.info(f"running {cfg.kind} experiment '{cfg.name}' over {len(cfg.seeds)} seeds with {workers} workers")

    summary = runner(cfg, out_dir, workers)
    summary_path = out_dir / "summary.json"
    summary.files.append(summary_path)
    write_json(summary_path, summary.as_dict())
    for c in summary.criteria:
        logger.info(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} (threshold {c.threshold:g})")
    return summary
