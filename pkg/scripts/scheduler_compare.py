"""Static vs dynamic (chunk 1) speedups at 2 and 16 workers, per preset."""

import argparse
import os

from pargpu.bench import Workload, render_table, scheduler_compare, write_summary_csv
from pargpu.config import load_config
from pargpu.trace import PRESETS, generate_workload


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--scale", type=int, default=4)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", default="2,16")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default="results/scheduler_compare.csv")
    args = ap.parse_args()

    cfg = load_config(args.config)
    workloads = [Workload(p, generate_workload(p, args.seed, args.scale)) for p in PRESETS]
    rows = scheduler_compare(cfg, workloads, [int(w) for w in args.workers.split(",")], args.repeats)
    print(render_table(rows), end="")
    for wl in workloads:
        for w in sorted({r.workers for r in rows}):
            pair = {r.policy: r.speedup for r in rows if r.workload == wl.name and r.workers == w}
            better = "dynamic" if pair["dynamic"] > pair["static"] else "static"
            print(f"{wl.name:<14} {w:>3} workers: {better} ahead ({pair['static']:.3f} vs {pair['dynamic']:.3f})")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    write_summary_csv(rows, args.out)


if __name__ == "__main__":
    main()
