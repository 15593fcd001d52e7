"""Boosted ensemble of generators.

Each new generator is trained with an extra penalty that grows as its fake
batch approaches the stored samples of earlier generators. At sampling time a
generator is picked by a softmax that favours generators whose fitted density
is low at the points emitted so far.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .data import GroupedDataset, write_samples_csv, read_samples_csv
from .models import load_mlp, save_mlp
from .numerics import Rng, Tensor
from .training import TrainConfig, TrainedGan, gan_loss_generator, sample_generator, train_gan

STREAM_STAGE = 10
STREAM_MEMORY = 11
STREAM_POOL = 12
STREAM_SELECT = 13

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class EnsembleConfig:
    k: int = 4
    m: int = 50
    lam: float = 0.1
    train: TrainConfig = field(default_factory=TrainConfig)
    eps_var: float = 1e-4
    eps_dist: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("ensemble size k must be at least 1")
        if self.m < 2:
            raise ValueError("memory size m must be at least 2")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.eps_var <= 0 or self.eps_dist <= 0:
            raise ValueError("eps_var and eps_dist must be positive")


@dataclass(frozen=True)
class DensityEstimator:
    mean: np.ndarray
    std: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class GeneratorEnsemble:
    generators: list
    memory: list
    estimators: list
    config: EnsembleConfig | None = None

    def __post_init__(self):
        if not (len(self.generators) == len(self.memory) == len(self.estimators)):
            raise ValueError("generators, memory sets and estimators must align")

    @property
    def k(self) -> int:
        return len(self.generators)


@dataclass
class SelectionState:
    generated: list = field(default_factory=list)

    def add(self, x) -> None:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite sample")
        self.generated.append(x)


# -- distance regulariser -------------------------------------------------

def _stack_memory(memory) -> np.ndarray | None:
    sets = [np.atleast_2d(np.asarray(q, dtype=np.float64)) for q in memory if len(q)]
    return np.vstack(sets) if sets else None


def theta_regularizer(memory, fakes, lam: float, eps_dist: float = 1e-6) -> Tensor:
    """``lam`` divided by the mean (floored) distance between stored and fake samples.

    The numerator is ``lam * |Q| * |F|`` so the value is independent of how
    many pairs are summed. Zero when no generator has been stored yet.
    """
    fakes = nx.as_tensor(fakes)
    if fakes.size == 0:
        raise ValueError("theta_regularizer: empty fake batch")
    Q = _stack_memory(memory)
    if Q is None:
        return Tensor(0.0)
    dist = nx.maximum_const(nx.pairwise_distances(Q, fakes), eps_dist)
    pairs = Q.shape[0] * fakes.shape[0]
    return nx.scale(nx.reciprocal(nx.tsum(dist)), lam * pairs)


def regularized_generator_loss(d_fake, fakes, memory, lam: float, mode: str = "non-saturating",
                               eps_dist: float = 1e-6) -> Tensor:
    return nx.add(gan_loss_generator(d_fake, mode), theta_regularizer(memory, fakes, lam, eps_dist))


# -- density estimators ----------------------------------------------------

def fit_density(samples, eps_var: float = 1e-4) -> DensityEstimator:
    """Diagonal Gaussian with population moments; variance floored at ``eps_var``."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if x.shape[0] < 2:
        raise ValueError("fit_density needs at least two samples")
    mu = x.mean(axis=0)
    var = np.maximum(((x - mu) ** 2).mean(axis=0), eps_var)
    return DensityEstimator(mu, np.sqrt(var))


def density_logpdf(est: DensityEstimator, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != est.dim:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {est.dim}")
    z = (x - est.mean) / est.std
    out = (-0.5 * LOG_2PI - np.log(est.std) - 0.5 * z * z).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _estimators(ens) -> list:
    return ens.estimators if isinstance(ens, GeneratorEnsemble) else list(ens)


def _softmax(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    return w / w.sum()


def selection_log_weights(estimators, generated) -> np.ndarray:
    """Sum over emitted points of ``1 - P_i(g)`` per estimator."""
    g = np.asarray(generated, dtype=np.float64)
    if g.size == 0:
        return np.zeros(len(estimators))
    g = g.reshape(len(generated), -1)
    return np.array([np.sum(1.0 - np.exp(density_logpdf(e, g))) for e in estimators])


def selection_probabilities(ens, state: SelectionState | None = None) -> np.ndarray:
    est = _estimators(ens)
    if not est:
        raise ValueError("empty ensemble")
    generated = state.generated if state is not None else []
    return _softmax(selection_log_weights(est, generated))


# -- training and sampling ---------------------------------------------------

def train_boosted_ensemble(ds: GroupedDataset, cfg: EnsembleConfig, rng: Rng | None = None,
                           progress=None) -> GeneratorEnsemble:
    """Train ``cfg.k`` generators in sequence, each pushed away from its predecessors' samples."""
    rng = rng if rng is not None else Rng(cfg.train.seed)
    gens, memory, estimators = [], [], []
    for i in range(cfg.k):
        stage_rng = rng if i == 0 else rng.derive(STREAM_STAGE, i)
        extra = None
        if memory:
            frozen = list(memory)
            extra = lambda F, Q=frozen: theta_regularizer(Q, F, cfg.lam, cfg.eps_dist)
        gan = train_gan(ds, cfg.train, stage_rng, extra)
        q = sample_generator(gan, cfg.m, rng.derive(STREAM_MEMORY, i))
        gens.append(gan)
        memory.append(q)
        estimators.append(fit_density(q, cfg.eps_var))
        if progress is not None:
            progress(i)
    return GeneratorEnsemble(gens, memory, estimators, cfg)


def ensemble_sample(ens: GeneratorEnsemble, n: int, rng: Rng, return_choices: bool = False):
    """Draw ``n`` points one at a time, re-weighting generators after each draw.

    Each generator's draws come from its own noise stream consumed in order,
    which is equivalent to sampling one point per selection.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    dim = ens.estimators[0].dim if ens.k else 0
    out = np.empty((n, dim))
    choices = np.empty(n, dtype=int)
    if n:
        pools = [sample_generator(g, n, rng.derive(STREAM_POOL, i)) for i, g in enumerate(ens.generators)]
        used = np.zeros(ens.k, dtype=int)
        select = rng.derive(STREAM_SELECT)
        logw = np.zeros(ens.k)
        for t in range(n):
            c = int(select.choice(_softmax(logw)))
            x = pools[c][used[c]]
            used[c] += 1
            out[t] = x
            choices[t] = c
            logw += np.array([1.0 - np.exp(density_logpdf(e, x)) for e in ens.estimators])
    return (out, choices) if return_choices else out


# -- checkpoint directory -----------------------------------------------------

def save_ensemble(ens: GeneratorEnsemble, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, (g, q) in enumerate(zip(ens.generators, ens.memory)):
        net = g.generator if isinstance(g, TrainedGan) else g
        save_mlp(net, d / f"generator_{i}.mlp")
        write_samples_csv(d / f"memory_{i}.csv", q, np.full(len(q), i))
    with open(d / "estimators.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gen_id", "dim", "mean", "std"])
        for i, e in enumerate(ens.estimators):
            for j in range(e.dim):
                w.writerow([i, j, repr(float(e.mean[j])), repr(float(e.std[j]))])


def load_ensemble(directory) -> GeneratorEnsemble:
    d = Path(directory)
    gens, memory = [], []
    i = 0
    while (d / f"generator_{i}.mlp").exists():
        gens.append(load_mlp(d / f"generator_{i}.mlp"))
        memory.append(read_samples_csv(d / f"memory_{i}.csv")[0])
        i += 1
    rows: dict[int, list] = {}
    with open(d / "estimators.csv", newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(int(r["gen_id"]), []).append((int(r["dim"]), float(r["mean"]), float(r["std"])))
    estimators = []
    for gid in range(len(gens)):
        entries = sorted(rows[gid])
        estimators.append(DensityEstimator(np.array([e[1] for e in entries]),
                                           np.array([e[2] for e in entries])))
    return GeneratorEnsemble(gens, memory, estimators)
