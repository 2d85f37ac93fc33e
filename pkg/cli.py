#!/usr/bin/env python3
"""
Command-line entry point.

    python cli.py bench --impl counter --threads 4 --ops 100000
    python cli.py verify --impl swcopy --procs 2 --exhaustive --depth 2
    python cli.py check --history h.jsonl --spec register
    python cli.py audit --instances 10000

Exit status: 0 when no violations were found, 1 when some were (a program that
raised inside an explored interleaving counts as one), 2 on usage errors and 3
when the run itself crashed.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from app.services.bench import BenchConfig, run_audit, run_bench
from app.services.buffer_pool import PoolConfigError, PoolMode
from app.services.lin_harness import SPECS, HistoryError, check_linearizable, explore_and_check, load_history, make_spec
from app.services.memcell import SchedulerError, Strategy
from app.services.scenarios import IMPLS, VARIANTS, build_scenario
from app.services.weak_llsc import Mutation

logger = logging.getLogger("Bench")

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


def _mix(text: str) -> Dict[str, float]:
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad mix entry {part!r}, expected name=ratio") from None
    return out


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="print the full report as JSON")
    parser.add_argument("--save", action="store_true", help="also write the report under LLSC_REPORTS_DIR")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def _add_exploration(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=[s.value for s in Strategy if s is not Strategy.DIRECTED], default=None)
    parser.add_argument("--exhaustive", action="store_true", help="shorthand for --strategy exhaustive")
    parser.add_argument("--depth", type=int, default=None, help="preemption bound for exhaustive exploration")
    parser.add_argument("--budget", type=int, default=None, help="interleaving cap (default: LLSC_EXPLORATION_BUDGET)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=[m.value for m in PoolMode], default=PoolMode.DEAMORTIZED.value)
    parser.add_argument("--scan-budget", type=int, default=None)
    parser.add_argument("--mutation", action="append", choices=[m.value for m in Mutation], default=[])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llsc", description="LL/SC and swcopy from CAS: benchmarks and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run a benchmark (hw) or a verification sweep (sim)")
    bench.add_argument("--impl", choices=IMPLS + ("destination",), default="llsc")
    bench.add_argument("--backend", choices=["hw", "sim"], default="hw")
    bench.add_argument("--threads", type=int, default=1)
    bench.add_argument("--objects", type=int, default=1)
    bench.add_argument("--width", type=int, default=1)
    bench.add_argument("--k", type=int, default=1, dest="outstanding")
    bench.add_argument("--ops", type=int, default=1000)
    bench.add_argument("--duration", type=float, default=None)
    bench.add_argument("--mix", type=_mix, default=None, help="e.g. sc=0.7,vl=0.2,cl=0.1")
    bench.add_argument("--csv", default=None, help="write the per-thread throughput table to this file")
    _add_exploration(bench)
    _add_common(bench)

    verify = sub.add_parser("verify", help="explore interleavings and check linearizability")
    verify.add_argument("--impl", choices=IMPLS + ("destination",), default="weakllsc")
    verify.add_argument("--procs", type=int, default=2)
    verify.add_argument("--k", type=int, default=1)
    verify.add_argument(
        "--scenario", choices=VARIANTS, default="default", help="recycle: directed buffer-recycling run (weakllsc only)"
    )
    _add_exploration(verify)
    _add_common(verify)

    check = sub.add_parser("check", help="check one recorded history")
    check.add_argument("--history", required=True)
    check.add_argument("--spec", choices=sorted(SPECS), required=True)
    check.add_argument("--max-ops", type=int, default=16)
    _add_common(check)

    audit = sub.add_parser("audit", help="set-difference oracle, scan, step and space audits")
    audit.add_argument("--instances", type=int, default=10_000)
    audit.add_argument("--scans", type=int, default=100)
    audit.add_argument("--procs", type=_int_list, default=[1, 2, 4, 8])
    audit.add_argument("--objects", type=_int_list, default=[1, 16, 256])
    audit.add_argument("--rounds", type=int, default=None)
    audit.add_argument("--seed", type=int, default=0)
    _add_common(audit)
    return parser


def _strategy(args: argparse.Namespace) -> Strategy:
    if args.exhaustive:
        return Strategy.EXHAUSTIVE
    return Strategy(args.strategy or Strategy.EXHAUSTIVE.value)


def _emit(args: argparse.Namespace, name: str, report: BaseModel, summary: List[str]) -> None:
    if args.json:
        print(report.model_dump_json(indent=2))
    else:
        for line in summary:
            print(line)
    if args.save:
        reports = Path(os.getenv("LLSC_REPORTS_DIR", "reports"))
        reports.mkdir(parents=True, exist_ok=True)
        path = reports / f"{name}.json"
        path.write_text(report.model_dump_json(indent=2))
        logger.info(f"Saved report to {path}")


def _violation_lines(violations: List[str]) -> List[str]:
    return [f"  - {v}" for v in violations[:20]]


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = BenchConfig(
        impl=args.impl,
        backend=args.backend,
        threads=args.threads,
        objects=args.objects,
        width=args.width,
        outstanding=args.outstanding,
        ops=args.ops,
        duration_s=args.duration,
        mix=args.mix,
        seed=args.seed,
        mode=args.mode,
        scan_budget=args.scan_budget,
        strategy=_strategy(args),
        budget=args.budget,
        preemption_bound=args.depth,
        mutations=args.mutation,
    )
    report = run_bench(cfg)
    if args.csv:
        import pandas as pd

        frame = pd.DataFrame(
            {"thread": range(len(report.per_thread_ops)), "ops": report.per_thread_ops}
        )
        if report.elapsed_s:
            frame["ops_per_sec"] = frame["ops"] / report.elapsed_s
        frame.to_csv(args.csv, index=False)
    summary = [
        f"{cfg.impl} [{cfg.backend.value}] threads={cfg.threads} M={cfg.objects} L={cfg.width} k={cfg.outstanding}",
        f"completed: {report.completed_ops}" + (f" in {report.elapsed_s:.3f}s ({report.ops_per_sec} ops/s)" if report.elapsed_s else ""),
        f"violations: {len(report.violations)}",
    ] + _violation_lines(report.violations)
    _emit(args, f"bench-{cfg.impl}-{cfg.backend.value}-p{cfg.threads}-s{cfg.seed}", report, summary)
    return EXIT_VIOLATIONS if report.violations else EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    scenario = build_scenario(
        args.impl,
        procs=args.procs,
        k=args.k,
        mutations=[Mutation(m) for m in args.mutation],
        mode=PoolMode(args.mode),
        scan_budget=args.scan_budget,
        variant=args.scenario,
    )
    if hasattr(scenario, "schedule"):
        report = explore_and_check(scenario, Strategy.DIRECTED, schedule=scenario.schedule())
    else:
        report = explore_and_check(scenario, _strategy(args), args.budget, seed=args.seed, preemption_bound=args.depth)
    summary = [
        f"{report.scenario}: {report.interleavings} interleavings ({report.strategy.value}"
        + (f", preemption bound {report.preemption_bound}" if report.preemption_bound is not None else "")
        + (", truncated" if report.truncated else "")
        + ")",
        f"distinct histories: {report.distinct_histories}"
        + (f", {report.errored} interleavings raised" if report.errored else ""),
        f"violations: {report.violations_total}",
    ] + _violation_lines([f"{v.kind}: {v.detail}" for v in report.violations])
    name = args.impl if args.scenario == "default" else f"{args.impl}-{args.scenario}"
    _emit(args, f"verify-{name}-p{args.procs}-s{args.seed}", report, summary)
    return EXIT_VIOLATIONS if report.violations_total else EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    history = load_history(args.history)
    verdict = check_linearizable(history, make_spec(args.spec), max_ops=args.max_ops)
    summary = ["linearizable" if verdict.linearizable else f"NOT linearizable: {verdict.reason}"]
    summary += [f"  {verdict.operations[i]}" for i in verdict.witness]
    _emit(args, f"check-{Path(args.history).stem}", verdict, summary)
    return EXIT_OK if verdict.linearizable else EXIT_VIOLATIONS


def cmd_audit(args: argparse.Namespace) -> int:
    report = run_audit(
        instances=args.instances,
        min_scans=args.scans,
        processes=args.procs,
        objects=args.objects,
        rounds=args.rounds,
        seed=args.seed,
    )
    sd = report.set_difference
    summary = [
        f"set difference: {sd.instances} instances, {sd.mismatches} mismatches, {sd.pid_reset_failures} pid reset failures",
        f"scans: " + ", ".join(f"{s.mode.value} P={s.processes} k={s.outstanding}: {s.scans} (min moved {s.min_transferred})" for s in report.scans),
        f"step bounds: {len(report.step_bounds)} rows, max scan units {report.max_scan_units}/{report.scan_budget}",
        f"space: {len(report.space)} configurations",
        f"violations: {len(report.violations)}",
    ] + _violation_lines(report.violations)
    _emit(args, f"audit-s{args.seed}", report, summary)
    return EXIT_VIOLATIONS if report.violations else EXIT_OK


COMMANDS = {"bench": cmd_bench, "verify": cmd_verify, "check": cmd_check, "audit": cmd_audit}


def cli_main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")

    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        print(f"error: invalid {location}: {first['msg']}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (PoolConfigError, HistoryError, SchedulerError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as e:
        logger.error(f"{args.command} crashed: {type(e).__name__}: {e}")
        print(f"error: {args.command} crashed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(cli_main())
