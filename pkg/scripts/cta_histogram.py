"""Per-CTA instruction counts of the synthetic presets, as text histograms.

The spread of CTA sizes is what separates the static and dynamic schedules.
"""

import argparse
import statistics
from collections import Counter

from pargpu.trace import PRESETS, generate_workload


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--scale", type=int, default=1)
    ap.add_argument("--bins", type=int, default=10)
    args = ap.parse_args()

    for p in PRESETS:
        prog = generate_workload(p, args.seed, args.scale)
        sizes = [c.num_instructions for k in prog.kernels for c in k.ctas]
        lo, hi = min(sizes), max(sizes)
        width = max(1, -(-(hi - lo + 1) // args.bins))
        hist = Counter((n - lo) // width for n in sizes)
        print(f"{p}: {len(sizes)} CTAs, min {lo}, median {statistics.median(sizes)}, max {hi}, max/median {hi / statistics.median(sizes):.1f}")
        for b in range(max(hist) + 1):
            if hist[b]:
                print(f"  [{lo + b * width:>6}, {lo + (b + 1) * width:>6}) {'#' * min(hist[b], 60)} {hist[b]}")


if __name__ == "__main__":
    main()
