"""Command-line frontend: ``asymfair {solve,allocate,check,experiment,reproduce}``.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 when a
numerical routine fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from .allocate import (
    PipelineConfig,
    max_percentile_allocation,
    multiplier_allocation,
    normalizing_multiplier_allocation,
    pipeline_multipliers,
    rounded_mnw_allocation,
    round_robin,
    welfare_max_allocation,
)
from .errors import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    QuadratureError,
    SizeGuardError,
    SolverError,
)
from .experiments import (
    ALGORITHMS,
    FIG3_GRID,
    FIG3_OFFSET_GRID,
    ExperimentConfig,
    TrialBatchResult,
    emit_results,
    run_experiment,
    sample_instance,
)
from .fairness import find_pareto_improvement, fpo_certificate_check, is_ef1, is_envy_free
from .instance import Instance, check_allocation
from .probability import ProbabilityOracle
from .profiles import Profile, load_profile
from .solver import SolverConfig, equalize

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (SolverError, QuadratureError, ConvergenceError, DegenerateError)
USAGE_ERRORS = (DomainError, SizeGuardError, OSError, ValueError)

log = logging.getLogger("asymfair")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _name_list(text):
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [t for t in names if t not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithms {bad}; choose from {', '.join(ALGORITHMS)}")
    return names


def _float_list(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base random seed (default 0)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")

    parser = _Parser(prog="asymfair", description="Fair allocation with approximately equalizing multipliers.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", parents=[common], help="compute equalizing multipliers for a profile")
    p.add_argument("--profile", default="peak10", help="built-in profile name or JSON file")
    p.add_argument("--delta", type=_positive_float, default=1e-5, help="target accuracy (default 1e-5)")
    p.add_argument("--q", type=_positive_float, help="density upper bound (default: from the profile)")
    p.add_argument("--fixed", action="store_true", help="fixed step size instead of annealing")
    p.add_argument("--trace", metavar="PATH", help="write the per-iteration trace as JSON")
    p.add_argument("--out", metavar="PATH", help="write the report as JSON")

    p = sub.add_parser("allocate", parents=[common], help="sample an instance and allocate it")
    p.add_argument("--profile", default="peak10", help="built-in profile name or JSON file")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="multiplier")
    p.add_argument("--m", type=int, default=100, help="number of items (default 100)")
    p.add_argument("--instance", metavar="CSV", help="read utilities from CSV instead of sampling")
    p.add_argument("--delta", type=_positive_float, help="multiplier accuracy (default: automatic)")
    p.add_argument("--q", type=_positive_float, help="density upper bound for the multiplier solve")
    p.add_argument("--out", metavar="PATH", help="write the allocation (item,agent rows)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="allocation format (default csv)")

    p = sub.add_parser("check", parents=[common], help="check EF, EF1 and Pareto optimality")
    p.add_argument("--allocation", required=True, metavar="PATH", help="allocation file from 'allocate'")
    p.add_argument("--instance", metavar="CSV", help="utilities CSV (default: resample from --profile)")
    p.add_argument("--profile", default="peak10", help="profile used to resample the instance")
    p.add_argument("--m", type=int, help="item count used to resample the instance")
    p.add_argument("--beta", type=_float_list, help="comma-separated multipliers for the fPO check")
    p.add_argument("--depth", type=int, choices=(1, 2), default=2, help="Pareto search depth")
    p.add_argument("--out", metavar="PATH", help="write the verdicts as JSON")

    p = sub.add_parser("experiment", parents=[common], help="Monte-Carlo fairness rates")
    p.add_argument("--config", metavar="JSON", help="experiment config file; flags given explicitly override it")
    p.add_argument("--profile", help="built-in profile name or JSON file (default peak10)")
    p.add_argument("--algorithms", type=_name_list,
                   help="comma-separated algorithm names (default multiplier,welfare_max,round_robin,mnw)")
    p.add_argument("--m-grid", type=_int_list, help="comma-separated item counts (default 10,20,...,10000)")
    p.add_argument("--trials", type=_positive_int, help="trials per cell (default 1000)")
    p.add_argument("--workers", type=_positive_int, help="worker processes (default: logical cores)")
    p.add_argument("--depth", type=int, choices=(1, 2), help="Pareto search depth (default 2)")
    p.add_argument("--delta", type=_positive_float, help="multiplier accuracy (default: automatic)")
    p.add_argument("--q", type=_positive_float, help="density upper bound for the multiplier solve")
    p.add_argument("--out", metavar="PATH", default="results.csv", help="results file (default results.csv)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="results format (default csv)")

    p = sub.add_parser("reproduce", parents=[common], help="rerun a configured reference experiment")
    p.add_argument("target", choices=sorted(TARGETS), metavar="TARGET",
                   help="one of " + ", ".join(sorted(TARGETS)))
    p.add_argument("--trials", type=_positive_int, help="trials per cell (default: per target)")
    p.add_argument("--m-grid", type=_int_list, help="override the item-count grid")
    p.add_argument("--workers", type=_positive_int, help="worker processes (default: logical cores)")
    p.add_argument("--out", metavar="DIR", default="results", help="output directory (default results)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="results format (default csv)")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _q_for(profile: Profile, q: Optional[float]) -> float:
    if q is not None:
        return q
    bounds = profile.density_bounds()
    if bounds is None:
        raise UsageError(f"profile {profile.name!r} declares no density bound; pass --q")
    return bounds.q


def _pipeline(profile: Profile, delta, q) -> PipelineConfig:
    if delta is None:
        return PipelineConfig(q=q)
    return PipelineConfig(q=_q_for(profile, q), delta=delta)


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


def _fmt_vec(v) -> str:
    return " ".join(f"{x:.8g}" for x in v)


# ---------------------------------------------------------------------------
# solve / allocate / check


def cmd_solve(args) -> int:
    profile = load_profile(args.profile)
    q = _q_for(profile, args.q)
    config = SolverConfig(delta=args.delta, q_bound=q, anneal=not args.fixed, record=bool(args.trace))
    oracle = ProbabilityOracle(profile)
    beta, trace = equalize(oracle, config)
    probs = ProbabilityOracle(profile)(beta)
    dev = np.abs(probs - 1.0 / profile.n)
    print(f"profile      {profile.name} (n={profile.n}, q={q:g}, delta={args.delta:g})")
    print(f"multipliers  {_fmt_vec(beta)}")
    print(f"probability  {_fmt_vec(probs)}")
    print(f"max |p-1/n|  {dev.max():.3e}")
    print(f"iterations   {trace.iterations}")
    print(f"oracle calls {trace.queries}")
    if args.trace:
        Path(args.trace).write_text(trace.to_json() + "\n")
    if args.out:
        _write_json(args.out, {
            "profile": profile.name, "delta": args.delta, "q": q, "multipliers": beta.tolist(),
            "probabilities": probs.tolist(), "max_deviation": float(dev.max()),
            "iterations": trace.iterations, "oracle_queries": trace.queries,
        })
    return EXIT_OK


def _instance(args, profile: Optional[Profile]) -> Instance:
    if args.instance:
        return Instance.from_csv(args.instance, profile=profile.name if profile else "custom")
    if profile is None or args.m is None:
        raise UsageError("pass --instance, or --profile and --m to resample")
    return sample_instance(profile, args.m, args.seed or 0)


def cmd_allocate(args) -> int:
    profile = load_profile(args.profile)
    instance = _instance(args, profile)
    if instance.n != profile.n:
        raise UsageError(f"instance has {instance.n} agents but profile {profile.name!r} has {profile.n}")
    beta = None
    name = args.algorithm
    if name == "multiplier":
        beta, _ = pipeline_multipliers(profile, _pipeline(profile, args.delta, args.q))
        owners = multiplier_allocation(instance, beta)
    elif name == "normalizing":
        owners = normalizing_multiplier_allocation(instance)
        beta = 1.0 / instance.utilities.sum(axis=1)
    else:
        allocator: Callable = {
            "welfare_max": welfare_max_allocation,
            "round_robin": round_robin,
            "mnw": rounded_mnw_allocation,
            "max_percentile": lambda inst: max_percentile_allocation(inst, profile),
        }[name]
        owners = allocator(instance)
    counts = np.bincount(owners, minlength=instance.n)
    print(f"{name} on {profile.name}: n={instance.n}, m={instance.m}, seed={args.seed or 0}")
    print(f"items per agent  {' '.join(map(str, counts))}")
    print(f"envy-free        {is_envy_free(instance, owners)}")
    print(f"EF1              {is_ef1(instance, owners)}")
    if args.out:
        write_allocation(args.out, owners, beta, args.format)
    return EXIT_OK


def write_allocation(path, owners, beta=None, format="csv"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "json":
        _write_json(path, {"owners": np.asarray(owners).tolist(),
                           "multipliers": None if beta is None else np.asarray(beta).tolist()})
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "agent"])
        w.writerows(enumerate(np.asarray(owners).tolist()))


def read_allocation(path):
    """Return ``(owners, multipliers or None)`` from either allocation format."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        beta = doc.get("multipliers")
        return np.asarray(doc["owners"], dtype=np.int64), None if beta is None else np.asarray(beta)
    rows = list(csv.DictReader(text.splitlines()))
    owners = np.zeros(len(rows), dtype=np.int64)
    for row in rows:
        owners[int(row["item"])] = int(row["agent"])
    return owners, None


def cmd_check(args) -> int:
    profile = None if args.instance else load_profile(args.profile)
    owners, stored_beta = read_allocation(args.allocation)
    if args.m is None and not args.instance:
        args.m = len(owners)
    instance = _instance(args, profile)
    owners = check_allocation(instance, owners)
    beta = args.beta if args.beta is not None else stored_beta
    trade = find_pareto_improvement(instance, owners, args.depth)
    verdict = {
        "envy_free": is_envy_free(instance, owners),
        "ef1": is_ef1(instance, owners),
        "pareto_improvement_found": trade is not None,
        "fpo_certified": None if beta is None else fpo_certificate_check(instance, owners, beta),
    }
    for k, v in verdict.items():
        print(f"{k:26s} {'n/a' if v is None else v}")
    if trade is not None:
        moves = ", ".join(f"item {a}: {f}->{t}" for a, f, t in trade.moves)
        print(f"{'improving ' + trade.kind:26s} {moves}")
        verdict["trade"] = {"kind": trade.kind, "moves": [list(map(int, mv)) for mv in trade.moves]}
    if args.out:
        _write_json(args.out, verdict)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment


def _print_table(results: Sequence[TrialBatchResult], metrics=("ef", "ef1", "po_violation_found")):
    print(f"{'algorithm':16s}{'m':>7s}" + "".join(f"{k:>20s}" for k in metrics) + f"{'trials':>8s}")
    for r in results:
        print(f"{r.algorithm:16s}{r.m:7d}" + "".join(f"{r.rate(k):20.3f}" for k in metrics) + f"{r.trials:8d}")


def cmd_experiment(args) -> int:
    merged = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {
        "profile": args.profile, "m_grid": args.m_grid, "trials": args.trials, "algorithms": args.algorithms,
        "base_seed": args.seed, "workers": args.workers, "depth": args.depth,
    }
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged.setdefault("workers", os.cpu_count() or 1)
    profile = load_profile(merged.get("profile", "peak10"))
    merged["profile"] = profile.name
    if args.delta is not None or args.q is not None or "pipeline" not in merged:
        merged["pipeline"] = _pipeline(profile, args.delta, args.q)
    else:
        merged["pipeline"] = PipelineConfig(**merged["pipeline"])
    config = ExperimentConfig(**merged)
    results = run_experiment(config, profile=profile)
    _print_table(results)
    path = emit_results(results, args.out, args.format)
    print(f"wrote {path}")
    return EXIT_OK if len(results) == len(config.m_grid) * len(config.algorithms) else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# reproduce


@dataclass(frozen=True)
class Target:
    profile: str
    algorithms: tuple
    m_grid: tuple
    trials: int
    references: tuple  # (algorithm, m or None, metric, comparison, value, note)
    q: Optional[float] = None
    delta: Optional[float] = None


FIG3_REFERENCES = (
    ("multiplier", 500, "ef", "~", 0.67, "multiplier allocation EF rate"),
    ("multiplier", 2000, "ef", ">=", 0.99, "multiplier allocation EF rate"),
    ("round_robin", 100, "ef", ">=", 0.97, "round robin EF rate"),
    ("round_robin", 200, "ef", ">=", 0.97, "round robin EF rate"),
    ("round_robin", 500, "po_violation_found", ">=", 0.95, "round robin is essentially never PO"),
    ("multiplier", None, "po_violation_found", "==", 0.0, "multiplier allocations are fPO"),
)

TARGETS = {
    "fig3": Target("peak10", ("multiplier", "welfare_max", "round_robin", "mnw"), FIG3_GRID, 1000,
                   FIG3_REFERENCES),
    "fig3-offset": Target("peak10", ("multiplier", "welfare_max", "round_robin", "mnw"), FIG3_OFFSET_GRID,
                          1000, (("round_robin", None, "ef1", "==", 1.0, "round robin is always EF1"),
                                 ("multiplier", None, "po_violation_found", "==", 0.0,
                                  "multiplier allocations are fPO"))),
    "beta5": Target("beta5", ("multiplier", "welfare_max", "round_robin", "mnw"), FIG3_GRID[:7], 1000,
                    (("round_robin", None, "ef1", "==", 1.0, "round robin is always EF1"),
                     ("multiplier", None, "po_violation_found", "==", 0.0, "multiplier allocations are fPO")),
                    q=5.0, delta=1e-5),
    "percentile-counterexample": Target(
        "percentile-counterexample", ("max_percentile",), (5000,), 500,
        (("max_percentile", 5000, "po_violation_found", ">=", 0.5, "max-percentile is not fPO"),)),
    "normalize-counterexample": Target(
        "normalize-counterexample", ("normalizing",), (3000,), 200,
        (("normalizing", 3000, "ef", "<=", 0.1, "normalized multipliers violate EF"),)),
    "rr-po-counterexample": Target(
        "rr-po-counterexample", ("round_robin",), (50,), 2000,
        (("round_robin", 50, "po_violation_found", ">=", 1 / 81, "lower bound (1/3)^(n+2) on non-PO"),)),
}


def _compare(op, measured, value):
    return {
        "~": abs(measured - value) <= 0.09,
        ">=": measured >= value,
        "<=": measured <= value,
        "==": abs(measured - value) < 1e-12,
    }[op]


def summarize(target_name: str, target: Target, results: Sequence[TrialBatchResult],
              beta=None, deviation=None) -> str:
    lines = [f"reproduce {target_name}: profile {target.profile}", ""]
    if beta is not None:
        lines.append(f"multipliers  {_fmt_vec(beta)}")
        if deviation is not None:
            lines.append(f"max |p-1/n|  {deviation:.3e}")
        lines.append("")
    lines.append(f"{'algorithm':16s}{'m':>7s}{'EF':>8s}{'EF1':>8s}{'non-PO':>8s}{'fPO cert':>10s}{'trials':>8s}")
    for r in results:
        lines.append(f"{r.algorithm:16s}{r.m:7d}{r.rate('ef'):8.3f}{r.rate('ef1'):8.3f}"
                     f"{r.rate('po_violation_found'):8.3f}{r.rate('fpo_certified'):10.3f}{r.trials:8d}")
    lines += ["", "reference comparison ('~' means within 0.09):"]
    for algorithm, m, metric, op, value, note in target.references:
        cells = [r for r in results if r.algorithm == algorithm and (m is None or r.m == m)]
        if not cells:
            lines.append(f"  [skip] {note}: no cell for {algorithm} at m={m}")
            continue
        for r in cells:
            rate = r.rate(metric)
            status = "ok" if _compare(op, rate, value) else "DIFF"
            lines.append(f"  [{status:4s}] {note}: m={r.m} {metric}={rate:.3f} (reference {op} {value:.4g})")
    return "\n".join(lines) + "\n"


def cmd_reproduce(args) -> int:
    target = TARGETS[args.target]
    profile = load_profile(target.profile)
    pipeline = (PipelineConfig(q=target.q, delta=target.delta) if target.delta is not None
                else PipelineConfig())
    beta = deviation = None
    if "multiplier" in target.algorithms:
        beta, _ = pipeline_multipliers(profile, pipeline)
        deviation = float(np.max(np.abs(ProbabilityOracle(profile)(beta) - 1.0 / profile.n)))
    config = ExperimentConfig(
        profile=profile.name, m_grid=args.m_grid or target.m_grid, trials=args.trials or target.trials,
        algorithms=target.algorithms, base_seed=args.seed or 0, workers=args.workers or os.cpu_count() or 1,
        pipeline=pipeline,
    )
    results = run_experiment(config, profile=profile, beta=beta)
    out = Path(args.out)
    data = emit_results(results, out / f"{args.target}.{args.format}", args.format)
    text = summarize(args.target, target, results, beta, deviation)
    summary = out / f"{args.target}-summary.txt"
    summary.write_text(text)
    print(text, end="")
    print(f"wrote {data} and {summary}")
    return EXIT_OK if len(results) == len(config.m_grid) * len(config.algorithms) else EXIT_NUMERICAL


COMMANDS = {
    "solve": cmd_solve,
    "allocate": cmd_allocate,
    "check": cmd_check,
    "experiment": cmd_experiment,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"asymfair: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"asymfair: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
