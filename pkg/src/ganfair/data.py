"""Synthetic grouped datasets, group assigners and minibatches."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .numerics import Rng

BLACK, WHITE = 0, 1


@dataclass(frozen=True)
class GroupedDataset:
    samples: np.ndarray
    labels: np.ndarray
    proportions: tuple[float, ...]
    kind: str = "custom"
    descriptors: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] != self.labels.shape[0]:
            raise ValueError("samples must be n x d with one label per row")
        if len(self.proportions) < 2:
            raise ValueError("a grouped dataset needs at least two groups")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("dataset contains non-finite samples")
        self.samples.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def k(self) -> int:
        return len(self.proportions)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def check_proportions(proportions: Sequence[float], tol: float = 1e-9) -> tuple[float, ...]:
    p = np.asarray(proportions, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("proportions need at least two entries")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"proportions must be non-negative and sum to 1, got {list(p)}")
    return tuple(float(v) for v in p)


def largest_remainder(proportions: Sequence[float], n: int) -> np.ndarray:
    """Integer counts summing to ``n``; leftover units go to the largest remainders,
    ties to the lowest index."""
    p = np.asarray(proportions, dtype=np.float64)
    exact = p * n
    counts = np.floor(exact).astype(int)
    rem = exact - counts
    short = n - counts.sum()
    order = sorted(range(p.size), key=lambda i: (-rem[i], i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _labels_from_counts(counts: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(counts.size), counts)


def make_gaussian_mixture(centers, sigma, proportions, n: int, rng: Rng) -> GroupedDataset:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    k = centers.shape[0]
    props = check_proportions(proportions)
    if len(props) != k:
        raise ValueError("one proportion per center required")
    sig = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (k,)).copy()
    if np.any(sig <= 0):
        raise ValueError("sigma must be positive")
    if n < k:
        raise ValueError("need at least one sample slot per group")
    labels = _labels_from_counts(largest_remainder(props, n))
    noise = rng.normal((n, centers.shape[1]))
    samples = centers[labels] + noise * sig[labels, None]
    return GroupedDataset(samples, labels, props, "mixture",
                          {"centers": centers, "sigma": sig})


def two_mode_mixture(proportions=(0.5, 0.5), n: int = 2000, rng: Rng | None = None) -> GroupedDataset:
    """Default benchmark: components at (-3, 0) and (3, 0), sigma 0.5."""
    return make_gaussian_mixture([[-3.0, 0.0], [3.0, 0.0]], 0.5, proportions, n, rng or Rng(0))


def ring_centers(k: int = 8, radius: float = 3.0) -> np.ndarray:
    angles = 2 * np.pi * np.arange(k) / k
    return np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)


def ring_mixture(k: int = 8, radius: float = 3.0, sigma: float = 0.3, proportions=None,
                 n: int = 4000, rng: Rng | None = None) -> GroupedDataset:
    props = proportions if proportions is not None else [1.0 / k] * k
    return make_gaussian_mixture(ring_centers(k, radius), sigma, props, n, rng or Rng(0))


# -- inverted patches ---------------------------------------------------------

def default_prototypes(side: int = 8) -> np.ndarray:
    """Four digit-like strokes on a ``side`` x ``side`` canvas, means near 0.25."""
    s = side
    one = np.zeros((s, s)); one[:, s // 2 - 1:s // 2 + 1] = 1.0
    zero = np.zeros((s, s)); zero[[0, -1], 1:-1] = 1.0; zero[1:-1, [0, -1]] = 1.0
    seven = np.zeros((s, s)); seven[0, :] = 1.0
    for r in range(1, s):
        seven[r, s - 1 - r] = 1.0
    four = np.zeros((s, s)); four[:, s - 3] = 1.0; four[s // 2, :] = 1.0; four[:s // 2, 0] = 1.0
    out = np.stack([p.reshape(-1) for p in (one, zero, seven, four)])
    # rescale intensity so every prototype sits at mean 0.25
    return np.clip(out * (0.25 / out.mean(axis=1, keepdims=True)), 0.0, 1.0)


def make_inverted_patches(prototypes, proportions, n: int, noise_sigma: float, rng: Rng,
                          margin: float = 0.1) -> GroupedDataset:
    """Group 0 keeps the dark prototypes, group 1 is the pixel inversion ``1 - x``."""
    protos = np.atleast_2d(np.asarray(prototypes, dtype=np.float64))
    means = protos.mean(axis=1)
    if np.any(means > 0.5 - margin):
        raise ValueError(f"prototype means {means.round(3).tolist()} exceed 0.5 - margin ({0.5 - margin})")
    props = check_proportions(proportions)
    if len(props) != 2:
        raise ValueError("inverted patches have exactly two groups (base, inverted)")
    if noise_sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    labels = _labels_from_counts(largest_remainder(props, n))
    which = rng.integers(protos.shape[0], n)
    base = np.clip(protos[which] + noise_sigma * rng.normal((n, protos.shape[1])), 0.0, 1.0)
    samples = np.where(labels[:, None] == WHITE, 1.0 - base, base)
    return GroupedDataset(samples, labels, props, "patches",
                          {"prototypes": protos, "noise_sigma": noise_sigma, "margin": margin})


# -- group assignment ------------------------------------------------------

@dataclass(frozen=True)
class GroupAssigner:
    kind: str
    tau: float = 0.5
    centers: tuple = ()

    def __post_init__(self):
        if self.kind not in ("mean-threshold", "nearest-center"):
            raise ValueError(f"unknown assigner kind {self.kind!r}")
        if self.kind == "nearest-center" and len(self.centers) == 0:
            raise ValueError("nearest-center assigner needs at least one center")

    @classmethod
    def mean_threshold(cls, tau: float = 0.5) -> "GroupAssigner":
        return cls("mean-threshold", tau=tau)

    @classmethod
    def nearest_center(cls, centers) -> "GroupAssigner":
        return cls("nearest-center", centers=tuple(map(tuple, np.atleast_2d(centers))))

    @property
    def k(self) -> int:
        return 2 if self.kind == "mean-threshold" else len(self.centers)

    def assign(self, samples) -> np.ndarray:
        x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if self.kind == "mean-threshold":
            return (x.mean(axis=1) > self.tau).astype(int)
        c = np.asarray(self.centers, dtype=np.float64)
        d2 = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        # argmin returns the first minimum, i.e. the lowest group id on ties
        return d2.argmin(axis=1)

    def describe(self) -> str:
        if self.kind == "mean-threshold":
            return f"mean-threshold:{self.tau:g}"
        return "nearest-center:" + ";".join(",".join(repr(float(v)) for v in c) for c in self.centers)

    @classmethod
    def parse(cls, text: str) -> "GroupAssigner":
        """Inverse of :meth:`describe`, e.g. ``nearest-center:-3,0;3,0``."""
        kind, _, arg = text.partition(":")
        if kind == "mean-threshold":
            return cls.mean_threshold(float(arg) if arg else 0.5)
        if kind == "nearest-center":
            centers = [[float(v) for v in c.split(",")] for c in arg.split(";") if c]
            return cls.nearest_center(centers)
        raise ValueError(f"unknown assigner {text!r}")


def assign_group_mean_threshold(sample, tau: float = 0.5) -> int:
    return int(np.mean(sample) > tau)


def assign_group_nearest_center(sample, centers) -> int:
    c = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if c.size == 0:
        raise ValueError("no centers given")
    d2 = ((c - np.asarray(sample, dtype=np.float64)) ** 2).sum(axis=1)
    return int(d2.argmin())


def default_assigner(ds: GroupedDataset) -> GroupAssigner:
    if ds.kind == "patches":
        return GroupAssigner.mean_threshold(0.5)
    if "centers" in ds.descriptors:
        return GroupAssigner.nearest_center(ds.descriptors["centers"])
    raise ValueError(f"no default assigner for dataset kind {ds.kind!r}")


# -- minibatches ------------------------------------------------------------

@dataclass(frozen=True)
class Batch:
    samples: np.ndarray
    labels: np.ndarray


def minibatch(ds: GroupedDataset, batch_size: int, rng: Rng) -> Batch:
    if batch_size < 1:
        raise ValueError("batch size must be at least 1")
    if ds.n == 0:
        raise ValueError("cannot sample from an empty dataset")
    idx = rng.integers(ds.n, batch_size)
    return Batch(ds.samples[idx], ds.labels[idx])


# -- CSV dump ----------------------------------------------------------------

def write_samples_csv(path, samples, labels) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    d = samples.shape[1] if samples.size else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_idx", "group_id", *[f"dim_{j}" for j in range(d)]])
        for i, (row, g) in enumerate(zip(samples, labels)):
            w.writerow([i, int(g), *[repr(float(v)) for v in row]])


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["sample_idx", "group_id"]:
            raise ValueError(f"{path}: unexpected header {header[:2]}")
        d = len(header) - 2
        rows = [r for r in reader if r]
    samples = np.array([[float(v) for v in r[2:]] for r in rows]).reshape(len(rows), d)
    labels = np.array([int(r[1]) for r in rows], dtype=int)
    return samples, labels


def dump_dataset(ds: GroupedDataset, path) -> None:
    write_samples_csv(Path(path), ds.samples, ds.labels)
