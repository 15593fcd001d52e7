"""Command line entry point: ``ganfair experiment|sample|evaluate|gradcheck``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .data import GroupAssigner, read_samples_csv, write_samples_csv
from .fairness import group_rates, uniform_target, write_report_csv

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ALL_DIVERGED = 0, 2, 3, 4
GRADCHECK_TOL = 1e-4

log = logging.getLogger("ganfair")


def _cmd_experiment(args) -> int:
    from .experiment import run_experiment

    cfg = load_config(args.config)
    out = args.out or cfg.out
    if not out:
        raise ConfigError("experiment.out", "no output directory (pass --out)")
    results = run_experiment(cfg, out, args.parallel)
    for r in results:
        if r.status == "ok":
            rates = " ".join(f"{x['rate']:.3f}" for x in r.rows)
            print(f"{r.rows[0]['run_id']}: rates {rates}  tv {r.report.tv:.4f}")
        else:
            print(f"{r.rows[0]['run_id']}: diverged ({r.message})")
    if all(r.status != "ok" for r in results):
        return EXIT_ALL_DIVERGED
    return EXIT_OK


def _cmd_sample(args) -> int:
    from .ensemble import ensemble_sample, load_ensemble
    from .models import load_mlp
    from .numerics import Rng
    from .training import sample_generator

    path = Path(args.model)
    rng = Rng(args.seed)
    if path.is_dir():
        if args.label is not None:
            raise ConfigError("--label", "ensembles are unconditional")
        samples, labels = ensemble_sample(load_ensemble(path), args.n, rng, return_choices=True)
    else:
        net = load_mlp(path)
        try:
            samples = sample_generator(net, args.n, rng, args.label)
        except ValueError as exc:
            raise ConfigError("--label", str(exc)) from exc
        labels = np.full(args.n, -1 if args.label is None else args.label)
    write_samples_csv(args.out, samples, labels)
    return EXIT_OK


def _parse_target(text: str, k: int) -> tuple:
    if text == "uniform":
        return uniform_target(k)
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError("--target", f"cannot parse {text!r}") from exc
    if len(vals) != k or abs(sum(vals) - 1.0) > 1e-9 or min(vals) < 0:
        raise ConfigError("--target", f"need {k} non-negative entries summing to 1")
    return vals


def _cmd_evaluate(args) -> int:
    try:
        assigner = GroupAssigner.parse(args.assigner)
    except ValueError as exc:
        raise ConfigError("--assigner", str(exc)) from exc
    samples, _ = read_samples_csv(args.samples)
    target = _parse_target(args.target, assigner.k)
    report = group_rates(samples, assigner, assigner.k, target, run_id="eval",
                         model="file", dataset=Path(args.samples).name)
    write_report_csv(report.rows(), args.out if args.out else sys.stdout)
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .gradsuite import run_all

    errors = run_all(points=args.points)
    width = max(len(n) for n in errors)
    for name, err in errors.items():
        flag = "ok" if err < GRADCHECK_TOL else "FAIL"
        print(f"{name:<{width}}  {err:.3e}  {flag}")
    worst = max(errors.values())
    print(f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOL:g})")
    return EXIT_OK if worst < GRADCHECK_TOL else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ganfair", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="train and evaluate a multi-seed study")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.add_argument("--parallel", type=int, default=None)
    e.set_defaults(func=_cmd_experiment)

    s = sub.add_parser("sample", help="draw samples from a saved generator or ensemble directory")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--label", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_sample)

    v = sub.add_parser("evaluate", help="group rates of a samples CSV")
    v.add_argument("--samples", required=True)
    v.add_argument("--assigner", required=True,
                   help="mean-threshold[:tau] or nearest-center:x,y;x,y;...")
    v.add_argument("--target", default="uniform", help="'uniform' or comma-separated proportions")
    v.add_argument("--out", default=None)
    v.set_defaults(func=_cmd_evaluate)

    g = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    g.add_argument("--points", type=int, default=20)
    g.set_defaults(func=_cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
