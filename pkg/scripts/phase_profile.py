"""Per-phase wall-time breakdown of sequential runs.

Shows how much of the simulator's time goes to the SM loop, the only phase
that runs in parallel.
"""

import argparse

from pargpu.config import load_config
from pargpu.engine import run
from pargpu.trace import PRESETS, generate_workload


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--presets", default=",".join(PRESETS))
    ap.add_argument("--scales", default="1,4,12")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    print(f"{'workload':<18} {'cycles':>7} {'wall_s':>8} {'sm':>6} {'memory':>7} {'icnt':>6} {'other':>6}")
    for p in args.presets.split(","):
        for s in args.scales.split(","):
            prof = run(cfg, generate_workload(p, args.seed, int(s))).profile
            sh = prof.shares()
            mem = sh.get("dram", 0) + sh.get("cache", 0)
            icnt = sum(sh.get(k, 0) for k in ("icnt_to_sm", "mem_to_icnt", "icnt_to_mem", "icnt_schedule"))
            other = 1.0 - sh.get("sm", 0) - mem - icnt
            print(f"{p + '-x' + s:<18} {prof.cycles:>7} {prof.wall_seconds:>8.3f} {sh.get('sm', 0):>6.3f} {mem:>7.3f} {icnt:>6.3f} {other:>6.3f}")


if __name__ == "__main__":
    main()
