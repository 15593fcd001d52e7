"""Compare a single GAN with the boosted generator ensemble on the 8-mode ring.

Prints a per-seed table of TV-to-uniform and the smallest group rate.
"""

import argparse

from ganfair.config import from_dict
from ganfair.experiment import run_single
from ganfair.fairness import aggregate_runs


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--draws", type=int, default=2000)
    args = p.parse_args(argv)

    base = {"dataset": {"kind": "ring"},
            "experiment": {"eval_draws": args.draws, "target": "uniform"},
            "ensemble": {"k": args.k, "m": args.m, "lam": args.lam}}
    reports = {}
    for model in ("gan", "ensemble"):
        cfg = from_dict({**base, "experiment": {**base["experiment"], "model": model}})
        reports[model] = [run_single(cfg, s).report for s in range(args.seeds)]

    print(f"{'seed':>4}  {'gan tv':>7}  {'ens tv':>7}  {'gan min':>7}  {'ens min':>7}")
    for s, (g, e) in enumerate(zip(reports["gan"], reports["ensemble"])):
        print(f"{s:>4}  {g.tv:7.3f}  {e.tv:7.3f}  {min(g.rates):7.3f}  {min(e.rates):7.3f}")
    for model, reps in reports.items():
        agg = aggregate_runs(reps)
        print(f"{model:>8}: median tv {agg.tv_median:.3f}  worst-group rate {agg.worst_group_min_rate:.3f}")


if __name__ == "__main__":
    main()
