"""Command-line entry point: ``pargpu {run,verify,bench,gen,profile}``.

Exit status is 0 on success, 2 on bad input (usage, config or trace
errors) and 1 when the simulator breaks an internal invariant or verify
finds a report that differs from the sequential one.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import bench
from .config import ConfigError, load_config
from .engine import InvariantError, run
from .parallel import DYNAMIC, KINDS, PROCESS, SEQ, STATIC, THREAD, WORKERS_ENV, SchedulePolicy, workers_from_env
from .stats import diff_reports, render_report
from .trace import PRESETS, SCALE_SMALL, TraceError, generate_workload, load_trace, render_trace

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    pass


def _positive(raw: str) -> int:
    try:
        n = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _int_list(raw: str) -> list[int]:
    items = [s for s in raw.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must not be empty")
    return [_positive(s.strip()) for s in items]


def _schedule_list(raw: str) -> list[str]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must not be empty")
    for s in items:
        if s not in (STATIC, DYNAMIC):
            raise argparse.ArgumentTypeError(f"unknown schedule {s!r}; choose static or dynamic")
    return items


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="machine description (default: built-in profile)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace file")
    src.add_argument("--preset", choices=PRESETS, help="generate a workload instead of reading one")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=_positive, default=SCALE_SMALL)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pargpu", description="Deterministic parallel cycle-level GPU simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one trace and write the stats report")
    _add_input(p)
    p.add_argument("--workers", type=_positive, help=f"worker count (env {WORKERS_ENV}; default 1)")
    p.add_argument("--schedule", choices=KINDS, help="seq, static or dynamic (default: seq for 1 worker, else static)")
    p.add_argument("--chunk", type=_positive, default=1)
    p.add_argument("--backend", choices=(THREAD, PROCESS), default=THREAD)
    p.add_argument("--stats-out", help="report path (default: standard output)")
    p.add_argument("--audit", action="store_true", help="check packet conservation every cycle")

    p = sub.add_parser("verify", help="check every schedule reproduces the sequential report")
    _add_input(p)
    p.add_argument("--workers-list", type=_int_list, default=[2, 4, 8, 16])
    p.add_argument("--schedules", type=_schedule_list, default=[STATIC, DYNAMIC])
    p.add_argument("--chunk", type=_positive, default=1)
    p.add_argument("--backend", choices=(THREAD, PROCESS), default=THREAD)

    p = sub.add_parser("bench", help="wall-clock sweep over worker counts")
    p.add_argument("--config")
    p.add_argument("--trace", action="append", default=[], help="trace file (repeatable)")
    p.add_argument("--preset", action="append", default=[], choices=PRESETS, help="preset (repeatable)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=_positive, default=SCALE_SMALL)
    p.add_argument("--workers", type=_int_list, default=list(bench.DEFAULT_WORKER_COUNTS))
    p.add_argument("--schedules", type=_schedule_list, default=[STATIC])
    p.add_argument("--chunk", type=_positive, default=1)
    p.add_argument("--backend", choices=(THREAD, PROCESS), default=THREAD)
    p.add_argument("--repeats", type=_positive, default=3)
    p.add_argument("--out", help="raw CSV, one row per repeat")
    p.add_argument("--summary-out", help="speedup / efficiency CSV")

    p = sub.add_parser("gen", help="write a synthetic workload trace")
    p.add_argument("--preset", choices=PRESETS, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=_positive, default=SCALE_SMALL)
    p.add_argument("--out", help="trace path (default: standard output)")

    p = sub.add_parser("profile", help="per-phase wall-time breakdown of a sequential run")
    _add_input(p)
    p.add_argument("--out", help="also write the profile here")
    return ap


def _load_program(args, cfg):
    if args.trace:
        return load_trace(args.trace, cfg)
    return generate_workload(args.preset, args.seed, args.scale)


def resolve_workers(flag: int | None) -> int:
    """Flag beats the environment, which beats the default of one."""
    return flag if flag is not None else workers_from_env(1)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    program = _load_program(args, cfg)
    workers = resolve_workers(args.workers)
    kind = args.schedule or (SEQ if workers == 1 else STATIC)
    policy = SchedulePolicy(kind, workers, args.chunk, args.backend)
    t0 = time.perf_counter()
    result = run(cfg, program, policy, audit=args.audit)
    wall = time.perf_counter() - t0
    report = render_report(result.stats)
    if args.stats_out:
        _write(args.stats_out, report)
    else:
        sys.stdout.write(report)
    print(f"{policy.label()}: cycles={result.stats.cycles} instructions={result.stats.instructions} wall={wall:.3f}s")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    program = _load_program(args, cfg)
    base = render_report(run(cfg, program, SchedulePolicy.sequential()).stats)
    status = EXIT_OK
    for kind in args.schedules:
        for w in args.workers_list:
            policy = SchedulePolicy(kind, w, args.chunk, args.backend)
            report = render_report(run(cfg, program, policy).stats)
            key = diff_reports(base, report)
            if key is None:
                print(f"{policy.label()}: identical")
            else:
                print(f"{policy.label()}: MISMATCH at {key}")
                status = EXIT_MISMATCH
    return status


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    workloads = [bench.Workload(path, load_trace(path, cfg)) for path in args.trace]
    workloads += [
        bench.Workload(f"{p}-s{args.seed}-x{args.scale}", generate_workload(p, args.seed, args.scale)) for p in args.preset
    ]
    if not workloads:
        raise UsageError("bench needs at least one --trace or --preset")
    records = bench.sweep(cfg, workloads, args.workers, args.schedules, args.repeats, args.chunk, args.backend)
    table = bench.SpeedupTable(records)
    sys.stdout.write(bench.render_table(table.rows))
    if len(workloads) >= 3:
        r = bench.correlate(records, args.schedules[0])
        print("correlation = " + ("undefined (zero variance)" if r is None else f"{r:.4f}"))
    if args.out:
        bench.write_records_csv(records, args.out)
    if args.summary_out:
        bench.write_summary_csv(table.rows, args.summary_out)
    return EXIT_OK


def cmd_gen(args) -> int:
    _write(args.out, render_trace(generate_workload(args.preset, args.seed, args.scale)))
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    program = _load_program(args, cfg)
    prof = run(cfg, program, SchedulePolicy.sequential()).profile
    text = prof.render()
    sys.stdout.write(text)
    print(f"sm_share = {prof.sm_share:.4f}")
    if args.out:
        _write(args.out, text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "bench": cmd_bench, "gen": cmd_gen, "profile": cmd_profile}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TraceError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, bench.DeterminismError, AssertionError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
