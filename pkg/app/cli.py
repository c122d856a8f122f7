"""
transfer-mdp command line.

    transfer-mdp run experiments/hardcase_thresholds.toml
    transfer-mdp validate model.json
    transfer-mdp hardcase --beta 0.2 --gamma 0.9 --eps 0.01 --p0 0.97,0.9,0.87,0.7
    transfer-mdp hull --base a.json --base b.json --coefficients 0.3,0.7 --eps 0.5 --delta 0.05
    transfer-mdp serve --port 8000
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.utils.errors import ExperimentConfigError, MdpValidationError, TransferMdpError
from app.utils.output import to_jsonable
from config.settings import get_settings

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _print(payload) -> None:
    print(json.dumps(to_jsonable(payload), indent=2))


def cmd_run(args: argparse.Namespace) -> int:
    from app.services.experiments import load_experiment_config, run_experiment

    cfg = load_experiment_config(args.config)
    if args.workers is not None:
        cfg = cfg.model_copy(update={"workers": args.workers})
    summary = run_experiment(cfg)
    _print(summary.as_dict())
    return EXIT_OK if summary.passed else EXIT_FAILED


def cmd_validate(args: argparse.Namespace) -> int:
    from app.utils.mdp_io import load_mdp

    try:
        mdp = load_mdp(args.path)
    except MdpValidationError as e:
        for line, message in e.diagnostics or [(None, str(e))]:
            where = f"{args.path}:{line}" if line is not None else str(args.path)
            print(f"{where}: {message}", file=sys.stderr)
        return EXIT_FAILED
    _print({
        "valid": True,
        "n_states": mdp.n_states,
        "n_pairs": mdp.n_pairs,
        "s_prime": list(mdp.s_prime),
        "gamma": mdp.gamma,
    })
    return EXIT_OK


def cmd_hardcase(args: argparse.Namespace) -> int:
    from app.models.configs import HardCaseParams
    from app.services.hardcase import (build_family, separation_check, threshold_report,
                                       verify_ball_membership, write_manifest)

    params = HardCaseParams(beta=args.beta, gamma=args.gamma, eps=args.eps, p0=args.p0)
    fam = build_family(params)
    ball_ok = verify_ball_membership(fam)
    separation = separation_check(fam)
    report = {
        "derived": fam.derived.as_dict(),
        "n_hypotheses": fam.n_hypotheses,
        "ball_membership": ball_ok,
        "separation": {"passed": separation.passed, "margins": separation.rows()},
        "thresholds": threshold_report(fam),
    }
    if args.out:
        report["manifest"] = str(write_manifest(fam, args.out))
    _print(report)
    return EXIT_OK if ball_ok and separation.passed else EXIT_FAILED


def cmd_hull(args: argparse.Namespace) -> int:
    from app.services.convexhull import (MixCoefficients, hull_gap_bound, hull_transfer,
                                         mix_bases, select_anchor_pairs)
    from app.services.planning import is_eps_optimal, value_iteration
    from app.services.sampling import oracle_for
    from app.utils.mdp_io import load_mdp
    from app.utils.output import write_json

    bases = [load_mdp(path) for path in args.base]
    hull = select_anchor_pairs(bases)
    truth = None
    if args.coefficients is not None:
        truth = MixCoefficients(values=args.coefficients)
        target = mix_bases(bases, truth)
    else:
        target = load_mdp(args.target)

    outcome = hull_transfer(
        hull, oracle_for(target, seed=args.seed), args.eps, args.delta,
        scale=args.scale, seed=args.seed, n_samples=args.samples,
    )
    v_star, _, _ = value_iteration(target)
    check = is_eps_optimal(target, outcome.policy, args.eps, v_star=v_star)
    result = {
        "anchor_pairs": [list(p) for p in hull.anchor_pairs],
        "lambda_min": hull.lambda_min,
        "lambda_max": hull.lambda_max,
        "coefficients": outcome.coefficients.values,
        "n_samples": outcome.n_samples,
        "theoretical_samples": outcome.theoretical_samples,
        "policy": outcome.policy.actions,
        "gap": check.worst_gap,
        "eps_optimal": check.passed,
    }
    if truth is not None:
        alpha = outcome.coefficients.distance(truth)
        bound = hull_gap_bound(args.eps / 2.0, alpha, hull.K, hull.gamma)
        result.update(alpha=alpha, bound=bound, bound_holds=check.worst_gap <= bound)
    if args.out:
        result["manifest"] = str(write_json(Path(args.out) / "hull_manifest.json", {
            "bases": [str(p) for p in args.base],
            "anchor_pairs": [list(p) for p in hull.anchor_pairs],
            "lambda_min": hull.lambda_min,
            "lambda_max": hull.lambda_max,
        }))
    _print(result)
    return EXIT_OK if result.get("bound_holds", True) else EXIT_FAILED


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=args.reload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transfer-mdp", description="Transfer learning for tabular MDPs")
    parser.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a TOML config")
    run.add_argument("config", type=Path)
    run.add_argument("--workers", type=int, default=None, help="trial worker processes")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="validate an MDP JSON file")
    validate.add_argument("path", type=Path)
    validate.set_defaults(func=cmd_validate)

    hardcase = sub.add_parser("hardcase", help="build and check the lower-bound family")
    hardcase.add_argument("--beta", type=float, required=True)
    hardcase.add_argument("--gamma", type=float, required=True)
    hardcase.add_argument("--eps", type=float, required=True)
    hardcase.add_argument("--p0", type=_floats, action="append", required=True,
                          help="one comma-separated row per decision state, sorted nonincreasing")
    hardcase.add_argument("--out", type=Path, default=None, help="write the family manifest here")
    hardcase.set_defaults(func=cmd_hardcase)

    hull = sub.add_parser("hull", help="transfer inside the convex hull of base models")
    hull.add_argument("--base", action="append", required=True, help="base MDP JSON file")
    target = hull.add_mutually_exclusive_group(required=True)
    target.add_argument("--target", help="unknown MDP JSON file")
    target.add_argument("--coefficients", type=_floats, help="true mixture weights of the bases")
    hull.add_argument("--eps", type=float, required=True)
    hull.add_argument("--delta", type=float, required=True)
    hull.add_argument("--scale", type=float, default=1e-4, help="factor on the theoretical sample count")
    hull.add_argument("--samples", type=int, default=None, help="explicit anchor sample count")
    hull.add_argument("--seed", type=int, default=0)
    hull.add_argument("--out", type=Path, default=None)
    hull.set_defaults(func=cmd_hull)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--reload", action="store_true")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else get_settings().log_level
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    try:
        return args.func(args)
    except ExperimentConfigError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (TransferMdpError, ValidationError, ValueError) as e:
        logger.error(str(e))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
