"""Command-line entry point: plan, solve, experiment, verify.

Exit codes are stable: 0 success, 1 malformed input, 2 uncertifiable
parameter profile, 3 iteration budget exhausted. All stdout JSON carries
"schema_version": 1. Every random draw flows from explicit seeds.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import covlab
from .engine import DrParams, run
from .planner import (
    Case,
    PlannerInput,
    PlannerResult,
    naive_stepsize,
    optimal_delta,
    smooth_stepsize,
)
from .reform import load_problem
from .stacks import Point, Weights, embed, point_to_json
from .verify import SUITES, run_suite

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSUPPORTED = 2
EXIT_MAX_ITER = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _parse_floats(text: str, flag: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise CliError(f"{flag}: could not parse {text!r} as a numeric list") from exc
    if not values:
        raise CliError(f"{flag}: empty list")
    return values


def _json_float(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _planner_json(result: PlannerResult, naive, smooth_max) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case": result.case.value,
        "delta_star": (None if result.delta_star is None
                       else {str(i + 1): v for i, v in sorted(result.delta_star.items())}),
        "lambda_bar_star": _json_float(result.lambda_bar_star),
        "certificate": (None if result.certificate is None
                        else {str(i + 1): v for i, v in sorted(result.certificate.items())}),
        "naive_lambda": _json_float(naive),
        "smooth_lambda_max": _json_float(smooth_max),
        "reason": result.reason,
    }


def cmd_plan(args) -> int:
    sigmas = _parse_floats(args.sigmas, "--sigmas")
    weights_raw = _parse_floats(args.weights, "--weights")
    if len(weights_raw) != len(sigmas) - 1:
        raise CliError(
            f"--weights needs {len(sigmas) - 1} entries for {len(sigmas)} sigmas"
        )
    try:
        weights = Weights.of(weights_raw)
        inp = PlannerInput(sigmas=sigmas, weights=weights, mu=args.mu)
        result = optimal_delta(inp)
        naive = naive_stepsize(sigmas, args.mu)
        smooth_max = None
        if args.lipschitz is not None:
            lips = _parse_floats(args.lipschitz, "--lipschitz")
            smooth_max = smooth_stepsize(lips, sigmas[:-1], weights, args.mu).lambda_max
    except CliError:
        raise
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(json.dumps(_planner_json(result, naive, smooth_max), indent=2))
    return EXIT_OK if result.case is not Case.UNSUPPORTED else EXIT_UNSUPPORTED


def cmd_solve(args) -> int:
    path = Path(args.problem)
    if not path.exists():
        raise CliError(f"problem file not found: {path}")
    try:
        problem, x0 = load_problem(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid problem file {path}: {exc}") from exc

    count = problem.m - 1
    weights = (Weights.of(_parse_floats(args.weights, "--weights"))
               if args.weights else Weights.equal(count))
    if weights.count != count:
        raise CliError(f"--weights needs {count} entries")

    lam = args.lam
    plan = optimal_delta(PlannerInput(sigmas=problem.sigmas, weights=weights,
                                      mu=args.mu))
    if lam is None:
        if plan.case is Case.UNSUPPORTED:
            raise CliError(
                f"planner cannot certify this profile ({plan.reason}); "
                "pass an explicit --lambda to override",
                code=EXIT_UNSUPPORTED,
            )
        lam = 1.0 if math.isinf(plan.lambda_bar_star) else 0.95 * plan.lambda_bar_star
    uncertified = plan.case is Case.UNSUPPORTED or (
        not math.isinf(plan.lambda_bar_star) and lam >= plan.lambda_bar_star)

    if x0 is None:
        x0 = embed(problem.zero_point(), count)
    attach = plan if (not uncertified
                      and not math.isinf(plan.lambda_bar_star)) else None
    params = DrParams(mu=args.mu, lam=lam, weights=weights, variant=args.variant,
                      max_iter=args.max_iter, tol=args.tol, plan=attach)
    result = run(params, problem, x0)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "iterates.csv", "w", newline="") as fh:
        result.log.write_csv(fh)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "terminated": result.terminated,
        "iterations": result.iterations,
        "lambda": lam,
        "lambda_certified": not uncertified,
        "residual_sq": result.log.res_sq[-1],
        "shadow": point_to_json(result.shadow),
        "certificate": {
            "residual": result.certificate.residual,
            "tol": result.certificate.tol,
            "success": result.certificate.success,
        },
    }
    with open(out_dir / "result.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    print(json.dumps(payload, indent=2))
    return EXIT_OK if result.terminated else EXIT_MAX_ITER


def cmd_experiment(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise CliError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = covlab.ExperimentConfig.from_json(json.load(fh))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid config {path}: {exc}") from exc

    out = covlab.sweep(cfg, parallel=args.parallel)
    files = covlab.emit(out, args.out)
    failures = [r for r in out.records if not r.terminated]
    status, means = covlab.ordering_trend(out.records)
    print(f"wrote {len(files)} files to {args.out}")
    print(f"runs: {len(out.records)}, non-terminated: {len(failures)}")
    if status != "skip":
        print(f"ordering trend (1-4-3-2 vs 1-2-3-4 at equal weights): {status} "
              f"({means['fast']:.2f} vs {means['slow']:.2f} mean iterations)")
    if failures and len(failures) == len(out.records):
        raise CliError("every run failed", code=EXIT_USAGE)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    if any(name not in SUITES for name in names):
        raise CliError(f"unknown suite {args.suite!r}; choose from "
                       f"{sorted(SUITES) + ['all']}")
    all_ok = True
    for name in names:
        report = run_suite(name, args.seed)
        print(f"suite {name} (seed {args.seed}):")
        for line in report.lines():
            print(line)
        all_ok &= report.passed
    return EXIT_OK if all_ok else EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drsplit",
        description="Weighted product-space Douglas-Rachford solver toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="certify a step size for a modulus profile")
    p.add_argument("--sigmas", required=True,
                   help="comma-separated moduli sigma_1..sigma_m")
    p.add_argument("--weights", required=True,
                   help="comma-separated block weights (sum to 1)")
    p.add_argument("--mu", type=float, required=True, help="relaxation in (0,2)")
    p.add_argument("--lipschitz", default=None,
                   help="optional smooth-mode Lipschitz constants L_1..L_{m-1}")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("solve", help="run the splitting on a problem-spec JSON")
    p.add_argument("--problem", required=True, help="problem JSON path")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="step size; defaults to 0.95 x the certified maximum")
    p.add_argument("--weights", default=None,
                   help="block weights; default equal")
    p.add_argument("--variant", choices=["FG", "GF"], default="FG")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run the covariance-estimation sweep")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="run a seeded invariant suite")
    p.add_argument("--suite", required=True,
                   help=f"one of {sorted(SUITES) + ['all']}")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    return parser


_LIST_FLAGS = ("--sigmas", "--weights", "--lipschitz")


def _merge_list_flags(argv):
    """Join list-valued flags with their argument so argparse accepts
    leading-dash values like `--sigmas -1,2`."""
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok in _LIST_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(_merge_list_flags(list(argv)))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
