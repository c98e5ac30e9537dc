"""Speedup / efficiency sweep over worker counts for every preset.

    python3 scripts/thread_sweep.py --scale 4 --workers 1,2,4,8,16 --out-dir results/
"""

import argparse
import os

from pargpu.bench import SpeedupTable, Workload, correlate, render_table, sweep, write_records_csv, write_summary_csv
from pargpu.config import load_config
from pargpu.trace import PRESETS, generate_workload


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--presets", default=",".join(PRESETS))
    ap.add_argument("--scales", default="1,4")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", default="1,2,4,8,16")
    ap.add_argument("--schedule", default="static", choices=("static", "dynamic"))
    ap.add_argument("--backend", default="thread", choices=("thread", "process"))
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    cfg = load_config(args.config)
    workloads = [
        Workload(f"{p}-x{s}", generate_workload(p, args.seed, int(s)))
        for p in args.presets.split(",")
        for s in args.scales.split(",")
    ]
    counts = [int(w) for w in args.workers.split(",")]
    records = sweep(cfg, workloads, counts, (args.schedule,), args.repeats, backend=args.backend)
    table = SpeedupTable(records)
    print(render_table(table.rows), end="")
    if len(workloads) >= 3:
        print(f"pearson r (seq time vs speedup at {max(counts)}): {correlate(records, args.schedule)}")

    os.makedirs(args.out_dir, exist_ok=True)
    write_records_csv(records, os.path.join(args.out_dir, "sweep_raw.csv"))
    write_summary_csv(table.rows, os.path.join(args.out_dir, "sweep_summary.csv"))


if __name__ == "__main__":
    main()
