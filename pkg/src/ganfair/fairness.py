"""Group generation rates, TV discrepancy and multi-run aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import GroupAssigner

REPORT_COLUMNS = ["run_id", "seed", "model", "dataset", "group_id", "target_prop",
                  "count", "rate", "tv_distance", "status"]


@dataclass(frozen=True)
class GroupRateReport:
    counts: tuple
    rates: tuple
    n: int
    assigner: str
    target: tuple
    tv: float
    run_id: str = ""
    seed: int = 0
    model: str = ""
    dataset: str = ""

    @property
    def k(self) -> int:
        return len(self.counts)

    def rows(self, status: str = "ok") -> list[dict]:
        return [{"run_id": self.run_id, "seed": self.seed, "model": self.model,
                 "dataset": self.dataset, "group_id": g, "target_prop": self.target[g],
                 "count": self.counts[g], "rate": self.rates[g], "tv_distance": self.tv,
                 "status": status} for g in range(self.k)]


@dataclass(frozen=True)
class AggregateReport:
    rate_median: tuple
    rate_q1: tuple
    rate_q3: tuple
    rate_min: tuple
    rate_max: tuple
    tv_median: float
    tv_max: float
    worst_group_min_rate: float
    runs: int
    tvs: tuple = field(default=(), repr=False)

    @property
    def rate_iqr(self) -> tuple:
        return tuple(b - a for a, b in zip(self.rate_q1, self.rate_q3))


def tv_distance(rates, target) -> float:
    r = np.asarray(rates, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if r.shape != t.shape:
        raise ValueError(f"length mismatch: {r.size} rates vs {t.size} targets")
    return float(0.5 * np.abs(r - t).sum())


def uniform_target(k: int) -> tuple:
    return tuple([1.0 / k] * k)


def group_rates(samples, assigner: GroupAssigner, k: int | None = None, target=None, **tags) -> GroupRateReport:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("group_rates needs a non-empty n x d sample set")
    k = k or assigner.k
    target = tuple(float(v) for v in (target if target is not None else uniform_target(k)))
    if len(target) != k or abs(sum(target) - 1.0) > 1e-9:
        raise ValueError("target must have k entries summing to 1")
    counts = np.bincount(assigner.assign(x), minlength=k)
    n = x.shape[0]
    rates = counts / n
    return GroupRateReport(tuple(int(c) for c in counts), tuple(float(r) for r in rates), n,
                           assigner.describe(), target, tv_distance(rates, target), **tags)


def conditional_purity(samples, label: int, assigner: GroupAssigner) -> float:
    """Fraction of samples generated under ``label`` that land in group ``label``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("no samples")
    return float(np.mean(assigner.assign(x) == label))


def lower_median(values) -> float:
    v = sorted(values)
    return v[(len(v) - 1) // 2]


def aggregate_runs(reports) -> AggregateReport:
    reports = list(reports)
    if not reports:
        raise ValueError("aggregate_runs needs at least one report")
    k = reports[0].k
    if any(r.k != k for r in reports):
        raise ValueError("reports disagree on the number of groups")
    rates = np.array([r.rates for r in reports])
    tvs = [r.tv for r in reports]
    return AggregateReport(
        rate_median=tuple(lower_median(rates[:, g]) for g in range(k)),
        rate_q1=tuple(float(v) for v in np.percentile(rates, 25, axis=0)),
        rate_q3=tuple(float(v) for v in np.percentile(rates, 75, axis=0)),
        rate_min=tuple(float(v) for v in rates.min(axis=0)),
        rate_max=tuple(float(v) for v in rates.max(axis=0)),
        tv_median=lower_median(tvs),
        tv_max=max(tvs),
        worst_group_min_rate=float(rates.min()),
        runs=len(reports),
        tvs=tuple(tvs),
    )


def _fmt(col: str, v) -> str:
    if col in ("rate", "tv_distance", "target_prop"):
        return "NaN" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.6f}"
    return str(v)


def write_report_csv(rows, path) -> None:
    """Write report rows to a path, or to an already open text stream."""
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(c, row.get(c, "")) for c in REPORT_COLUMNS])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for r in csv.DictReader(fh):
            r["group_id"] = int(r["group_id"])
            r["count"] = int(r["count"]) if r["count"] not in ("", "NaN") else None
            for c in ("rate", "tv_distance", "target_prop"):
                r[c] = float(r[c])
            out.append(r)
        return out
