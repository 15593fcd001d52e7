"""Sweep the majority share of a two-mode mixture and report how often a
vanilla GAN generates the majority group.

    python3 scripts/imbalance_study.py --props 0.5 0.6 0.7 0.8 --seeds 5
"""

import argparse
import csv
import sys

from ganfair.config import from_dict
from ganfair.experiment import run_single
from ganfair.fairness import lower_median


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--props", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = p.parse_args(argv)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["majority_prop", "seed", "majority_rate", "tv_distance"])
    for share in args.props:
        cfg = from_dict({"dataset": {"kind": "two-mode", "proportions": [share, 1 - share]},
                         "train": {"steps": args.steps}})
        rates = []
        for seed in range(args.seeds):
            r = run_single(cfg, seed)
            rates.append(r.report.rates[0])
            writer.writerow([share, seed, f"{r.report.rates[0]:.6f}", f"{r.report.tv:.6f}"])
        print(f"# share {share:.2f}: median majority rate {lower_median(rates):.3f}", file=sys.stderr)
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
