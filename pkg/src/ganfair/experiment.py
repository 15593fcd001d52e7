"""Multi-seed experiment runner.

Every seed is an independent, shared-nothing run; results are gathered and
written in seed order so the output does not depend on completion order.
"""

from __future__ import annotations

import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .data import write_samples_csv
from .ensemble import ensemble_sample, save_ensemble, train_boosted_ensemble
from .fairness import aggregate_runs, conditional_purity, group_rates, write_report_csv
from .models import save_mlp
from .numerics import Rng
from .plots import emit_scatter_svg
from .training import (STREAM_SAMPLE, TrainingDiverged, sample_by_proportions,
                       sample_generator, train_cgan, train_gan, write_history_csv)

log = logging.getLogger(__name__)

THREADS_ENV = "GANFAIR_THREADS"


@dataclass
class RunResult:
    seed: int
    rows: list
    status: str = "ok"
    message: str = ""
    purity: list = field(default_factory=list)
    report: object = None


def run_id(seed: int) -> str:
    return f"seed{seed}"


def evaluation_rng(seed: int) -> Rng:
    return Rng(seed).derive(STREAM_SAMPLE, 0)


def run_single(cfg: ExperimentConfig, seed: int, out_dir: Path | None = None) -> RunResult:
    """Train and evaluate one seed. Writes per-run artifacts when ``out_dir`` is set."""
    ds = cfg.dataset.build()
    assigner = cfg.assigner_for(ds)
    target = cfg.target_for(ds)
    k = ds.k
    tags = dict(run_id=run_id(seed), seed=seed, model=cfg.model, dataset=cfg.dataset.name)
    rng = Rng(seed)
    train = _with_seed(cfg.train, seed)
    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir) / run_id(seed)
        run_dir.mkdir(parents=True, exist_ok=True)
    purity = []
    try:
        if cfg.model == "gan":
            model = train_gan(ds, train, rng)
            samples = sample_generator(model, cfg.eval_draws, evaluation_rng(seed))
        elif cfg.model == "cgan":
            model = train_cgan(ds, train, rng)
            samples, _ = sample_by_proportions(model, cfg.eval_draws, evaluation_rng(seed))
            for label in range(k):
                s = sample_generator(model, cfg.purity_draws, evaluation_rng(seed).derive(label), label)
                purity.append(conditional_purity(s, label, assigner))
        else:
            ens_cfg = _with_train(cfg.ensemble, train)
            model = train_boosted_ensemble(ds, ens_cfg, rng)
            samples = ensemble_sample(model, cfg.eval_draws, evaluation_rng(seed))
    except TrainingDiverged as exc:
        log.warning("%s diverged: %s", run_id(seed), exc)
        rows = [dict(tags, group_id=g, target_prop=target[g], count="", rate=float("nan"),
                     tv_distance=float("nan"), status="diverged") for g in range(k)]
        return RunResult(seed, rows, "diverged", str(exc))

    report = group_rates(samples, assigner, k, target, **tags)
    labels = assigner.assign(samples)
    if run_dir is not None:
        write_samples_csv(run_dir / "samples.csv", samples, labels)
        if cfg.model == "ensemble":
            save_ensemble(model, run_dir / "ensemble")
        else:
            save_mlp(model.generator, run_dir / "generator.mlp")
            save_mlp(model.discriminator, run_dir / "discriminator.mlp")
            write_history_csv(model.history, run_dir / "history.csv")
        if cfg.scatter:
            emit_scatter_svg(samples, labels, run_dir / "scatter.svg", k, report.rates,
                             title=f"{cfg.model} {cfg.dataset.name} {run_id(seed)}")
    return RunResult(seed, report.rows(), purity=purity, report=report)


def _with_seed(train, seed):
    from dataclasses import replace
    return replace(train, seed=seed)


def _with_train(ens, train):
    from dataclasses import replace
    return replace(ens, train=train)


def _worker(args):
    cfg, seed, out_dir = args
    return run_single(cfg, seed, out_dir)


def resolve_workers(requested: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, requested)


def run_seeds(cfg: ExperimentConfig, out_dir: Path | None = None, workers: int = 1) -> list[RunResult]:
    jobs = [(cfg, s, out_dir) for s in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    return sorted(results, key=lambda r: r.seed)


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> list[RunResult]:
    """Run every seed and write the run directory. Returns per-seed results."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    workers = resolve_workers(workers if workers is not None else cfg.parallel)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    results = run_seeds(cfg, out, workers)
    write_report_csv([row for r in results for row in r.rows], out / "metrics.csv")

    ok = [r.report for r in results if r.status == "ok"]
    summary = {"runs": len(results), "diverged": [r.seed for r in results if r.status != "ok"]}
    if ok:
        agg = aggregate_runs(ok)
        summary.update(tv_median=agg.tv_median, tv_max=agg.tv_max,
                       rate_median=list(agg.rate_median),
                       worst_group_min_rate=agg.worst_group_min_rate)
    if cfg.model == "cgan":
        summary["purity"] = {run_id(r.seed): r.purity for r in results if r.status == "ok"}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    # wall-clock data lives only here so every other file is reproducible
    meta = {"started": started, "finished": time.time(), "workers": workers,
            "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return results
