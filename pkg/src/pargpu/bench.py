"""Wall-clock measurement harness.

Speedup is always taken against the sequential simulator: every sweep runs
the ``seq`` baseline first and a requested worker count of 1 is that
baseline.  Each cell repeats the whole run and downstream numbers use the
median.  Only the engine run is timed; traces are generated or parsed
before the clock starts.

Simulations run one at a time.  Every cell's rendered report is hashed and
compared with the baseline's, so a sweep doubles as a determinism check.
"""

from __future__ import annotations

import csv
import hashlib
import statistics
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .config import GpuConfig
from .engine import run
from .parallel import DYNAMIC, SEQ, STATIC, THREAD, SchedulePolicy
from .stats import diff_reports, render_report
from .trace import TraceProgram

DEFAULT_WORKER_COUNTS = (1, 2, 4, 8, 16)
RAW_HEADER = ("workload", "policy", "workers", "repeat", "wall_seconds", "digest")
SUMMARY_HEADER = ("workload", "policy", "workers", "median_seconds", "speedup", "efficiency")


class DeterminismError(RuntimeError):
    """Two cells of one workload produced different reports."""


@dataclass(frozen=True)
class Workload:
    name: str
    program: TraceProgram


@dataclass(frozen=True)
class BenchRecord:
    workload: str
    policy: str
    workers: int
    wall_times: tuple[float, ...]
    stats_digest: str

    @property
    def repeats(self) -> int:
        return len(self.wall_times)

    @property
    def median(self) -> float:
        return statistics.median(self.wall_times)


def digest(report: str) -> str:
    return hashlib.sha256(report.encode("utf-8")).hexdigest()


def _measure(cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy, repeats: int) -> tuple[list[float], str]:
    times = []
    report = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = run(cfg, program, policy)
        times.append(time.perf_counter() - t0)
        text = render_report(result.stats)
        if report is None:
            report = text
        elif text != report:
            key = diff_reports(report, text)
            raise DeterminismError(f"{policy.label()} is not repeatable: first differing key {key}")
    return times, report


def sweep(
    cfg: GpuConfig,
    workloads: Iterable[Workload],
    worker_counts: Sequence[int] = DEFAULT_WORKER_COUNTS,
    policies: Sequence[str] = (STATIC,),
    repeats: int = 3,
    chunk: int = 1,
    backend: str = THREAD,
) -> list[BenchRecord]:
    """Time every (workload, policy, workers) cell ``repeats`` times."""
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    if not worker_counts or any(w < 1 for w in worker_counts):
        raise ValueError("worker counts must be a non-empty list of positive integers")
    for p in policies:
        if p not in (STATIC, DYNAMIC):
            raise ValueError(f"unknown policy {p!r} (the sequential baseline always runs)")

    records = []
    for wl in workloads:
        times, base_report = _measure(cfg, wl.program, SchedulePolicy.sequential(), repeats)
        base_digest = digest(base_report)
        records.append(BenchRecord(wl.name, SEQ, 1, tuple(times), base_digest))
        for kind in policies:
            for w in worker_counts:
                if w == 1:
                    continue
                policy = SchedulePolicy(kind, w, chunk, backend)
                times, report = _measure(cfg, wl.program, policy, repeats)
                d = digest(report)
                if d != base_digest:
                    key = diff_reports(base_report, report)
                    raise DeterminismError(
                        f"{wl.name}: {policy.label()} differs from the sequential run at key {key}"
                    )
                records.append(BenchRecord(wl.name, kind, w, tuple(times), d))
    return records


@dataclass(frozen=True)
class SpeedupRow:
    workload: str
    policy: str
    workers: int
    median_seconds: float
    speedup: float
    efficiency: float


class SpeedupTable:
    """Median-based speedup and efficiency for every measured cell."""

    def __init__(self, records: Sequence[BenchRecord]):
        self.baseline: dict[str, float] = {}
        for r in records:
            if r.policy == SEQ:
                self.baseline[r.workload] = r.median
        self.rows: list[SpeedupRow] = []
        for r in records:
            if r.workload not in self.baseline:
                raise ValueError(f"no sequential baseline for {r.workload}")
            s = self.baseline[r.workload] / r.median if r.median > 0 else float("inf")
            self.rows.append(SpeedupRow(r.workload, r.policy, r.workers, r.median, s, s / r.workers))

    def speedup(self, workload: str, policy: str, workers: int) -> float:
        if workers == 1:
            return 1.0
        for row in self.rows:
            if (row.workload, row.policy, row.workers) == (workload, policy, workers):
                return row.speedup
        raise KeyError((workload, policy, workers))

    def workloads(self) -> list[str]:
        return list(self.baseline)

    def max_workers(self, workload: str, policy: str) -> int:
        ws = [r.workers for r in self.rows if r.workload == workload and r.policy in (policy, SEQ)]
        return max(ws)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson r, or None when either side has zero variance."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equally long sequences of length >= 2")
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None


def correlate(records: Sequence[BenchRecord], policy: str = STATIC) -> float | None:
    """Correlation between sequential time and speedup at the largest worker count."""
    table = SpeedupTable(records)
    names = table.workloads()
    if len(names) < 3:
        raise ValueError("correlation needs at least 3 workloads")
    xs, ys = [], []
    for name in names:
        xs.append(table.baseline[name])
        w = table.max_workers(name, policy)
        ys.append(table.speedup(name, SEQ if w == 1 else policy, w))
    return pearson(xs, ys)


def scheduler_compare(
    cfg: GpuConfig,
    workloads: Iterable[Workload],
    worker_counts: Sequence[int] = (2, 16),
    repeats: int = 3,
) -> list[SpeedupRow]:
    """Static and dynamic (chunk 1) speedups for each workload and worker count."""
    records = sweep(cfg, workloads, worker_counts, (STATIC, DYNAMIC), repeats)
    return [r for r in SpeedupTable(records).rows if r.policy != SEQ]


def write_records_csv(records: Sequence[BenchRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        out = csv.writer(f)
        out.writerow(RAW_HEADER)
        for r in records:
            for i, t in enumerate(r.wall_times):
                out.writerow([r.workload, r.policy, r.workers, i, f"{t:.6f}", r.stats_digest])


def write_summary_csv(rows: Sequence[SpeedupRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        out = csv.writer(f)
        out.writerow(SUMMARY_HEADER)
        for r in rows:
            out.writerow([r.workload, r.policy, r.workers, f"{r.median_seconds:.6f}", f"{r.speedup:.4f}", f"{r.efficiency:.4f}"])


def render_table(rows: Sequence[SpeedupRow]) -> str:
    lines = [f"{'workload':<24} {'policy':<8} {'workers':>7} {'median_s':>10} {'speedup':>8} {'eff':>6}"]
    for r in rows:
        lines.append(
            f"{r.workload:<24} {r.policy:<8} {r.workers:>7} {r.median_seconds:>10.4f} {r.speedup:>8.3f} {r.efficiency:>6.3f}"
        )
    return "\n".join(lines) + "\n"
