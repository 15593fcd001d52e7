"""Vanilla and conditional GAN training on grouped datasets."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import numerics as nx
from .data import GroupedDataset, largest_remainder, minibatch
from .models import (PROB_CLAMP, MlpNetwork, concat_condition, default_discriminator,
                     default_generator, one_hot)
from .numerics import AdamState, Rng, Tensor

log = logging.getLogger(__name__)

GEN_LOSS_MODES = ("non-saturating", "literal-saturating")

# sub-stream keys under the run's Rng
STREAM_STEP = 1
STREAM_INIT = 2
STREAM_SAMPLE = 3


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"training diverged at step {step}: {cause}")
        self.step = step


@dataclass
class TrainConfig:
    steps: int = 3000
    batch_size: int = 64
    noise_dim: int = 2
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    d_steps: int = 1
    g_loss: str = "non-saturating"
    seed: int = 0
    hidden: tuple = (32, 32)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be positive")
        if self.d_steps < 1:
            raise ValueError("d_steps must be at least 1")
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be at least 1")
        if self.g_loss not in GEN_LOSS_MODES:
            raise ValueError(f"g_loss must be one of {GEN_LOSS_MODES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class TrainedGan:
    generator: MlpNetwork
    discriminator: MlpNetwork
    history: dict
    config: TrainConfig

    @property
    def conditional(self) -> bool:
        return False


@dataclass
class TrainedCGan(TrainedGan):
    n_groups: int = 2
    proportions: tuple = field(default=(0.5, 0.5))

    @property
    def conditional(self) -> bool:
        return True


# -- losses -----------------------------------------------------------------

def _probs(x) -> Tensor:
    t = nx.as_tensor(x)
    if t.size == 0:
        raise ValueError("empty batch")
    return nx.clamp(t, PROB_CLAMP, 1.0 - PROB_CLAMP)


def gan_loss_discriminator(d_real, d_fake) -> Tensor:
    """-(mean log D(x) + mean log(1 - D(G(z))))."""
    real = _probs(d_real)
    fake = _probs(d_fake)
    return nx.neg(nx.add(nx.mean(nx.log(real)), nx.mean(nx.log(1.0 - fake))))


def gan_loss_generator(d_fake, mode: str = "non-saturating") -> Tensor:
    """Generator loss.

    ``non-saturating`` is -mean log D(G(z)). ``literal-saturating`` is
    -mean log(1 - D(G(z))) with the sign exactly as written in the boosting
    loss; minimising it pushes D(G(z)) towards 0.
    """
    fake = _probs(d_fake)
    if mode == "non-saturating":
        return nx.neg(nx.mean(nx.log(fake)))
    if mode == "literal-saturating":
        return nx.neg(nx.mean(nx.log(1.0 - fake)))
    raise ValueError(f"unknown generator loss mode {mode!r}")


# -- one training step's randomness -----------------------------------------

@dataclass
class StepDraws:
    real: list            # per D-step real sample batches
    real_labels: list
    d_noise: list         # per D-step noise for the fake batch
    d_fake_labels: list
    g_noise: np.ndarray
    g_fake_labels: np.ndarray | None


def draw_step(ds: GroupedDataset, cfg: TrainConfig, rng: Rng, step: int,
              conditional: bool = False) -> StepDraws:
    """All random draws consumed by training step ``step``; replayable."""
    srng = rng.derive(STREAM_STEP, step)
    props = np.asarray(ds.proportions)
    real, real_labels, d_noise, d_fake_labels = [], [], [], []
    for _ in range(cfg.d_steps):
        b = minibatch(ds, cfg.batch_size, srng)
        real.append(b.samples)
        real_labels.append(b.labels)
        d_noise.append(srng.normal((cfg.batch_size, cfg.noise_dim)))
        d_fake_labels.append(srng.choice(props, cfg.batch_size) if conditional else None)
    g_noise = srng.normal((cfg.batch_size, cfg.noise_dim))
    g_labels = srng.choice(props, cfg.batch_size) if conditional else None
    return StepDraws(real, real_labels, d_noise, d_fake_labels, g_noise, g_labels)


def _gen_input(noise: np.ndarray, labels, k: int) -> np.ndarray:
    if labels is None:
        return noise
    return np.concatenate([noise, one_hot(labels, k)], axis=1)


def _disc(D: MlpNetwork, x: Tensor, labels, k: int) -> Tensor:
    if labels is not None:
        x = concat_condition(x, labels, k)
    return D.forward(x)


def discriminator_loss(G: MlpNetwork, D: MlpNetwork, real, real_labels, noise, fake_labels,
                       k: int = 0) -> Tensor:
    fake = G.predict(_gen_input(noise, fake_labels, k))
    d_real = _disc(D, Tensor(real), real_labels if fake_labels is not None else None, k)
    d_fake = _disc(D, Tensor(fake), fake_labels, k)
    return gan_loss_discriminator(d_real, d_fake)


def generator_loss(G: MlpNetwork, D: MlpNetwork, noise, fake_labels, mode: str, k: int = 0,
                   extra: Callable[[Tensor], Tensor] | None = None) -> tuple[Tensor, float]:
    """Generator objective plus optional extra term on the fake batch.

    Returns the loss and the batch mean of D(G(z)).
    """
    fake = G.forward(Tensor(_gen_input(noise, fake_labels, k)))
    d_fake = _disc(D, fake, fake_labels, k)
    loss = gan_loss_generator(d_fake, mode)
    if extra is not None:
        loss = nx.add(loss, extra(fake))
    return loss, float(d_fake.values.mean())


# -- training loops -----------------------------------------------------------

def init_networks(ds: GroupedDataset, cfg: TrainConfig, rng: Rng, n_groups: int = 0):
    G = default_generator(cfg.noise_dim, ds.dim, rng.derive(STREAM_INIT, 0), n_groups, cfg.hidden)
    D = default_discriminator(ds.dim, rng.derive(STREAM_INIT, 1), n_groups, cfg.hidden)
    return G, D


def _fit(ds: GroupedDataset, cfg: TrainConfig, rng: Rng, conditional: bool,
         extra: Callable[[Tensor], Tensor] | None = None):
    k = ds.k if conditional else 0
    G, D = init_networks(ds, cfg, rng, k)
    g_opt = AdamState(cfg.lr_g, cfg.beta1, cfg.beta2, cfg.eps)
    d_opt = AdamState(cfg.lr_d, cfg.beta1, cfg.beta2, cfg.eps)
    g_params, d_params = G.parameters(), D.parameters()
    hist = {"d_loss": np.empty(cfg.steps), "g_loss": np.empty(cfg.steps),
            "mean_d_fake": np.empty(cfg.steps)}
    for step in range(cfg.steps):
        try:
            draws = draw_step(ds, cfg, rng, step, conditional)
            for j in range(cfg.d_steps):
                loss_d = discriminator_loss(G, D, draws.real[j], draws.real_labels[j],
                                            draws.d_noise[j], draws.d_fake_labels[j], k)
                nx.adam_step(d_params, nx.backward(loss_d), d_opt)
            loss_g, mean_fake = generator_loss(G, D, draws.g_noise, draws.g_fake_labels,
                                               cfg.g_loss, k, extra)
            nx.adam_step(g_params, nx.backward(loss_g), g_opt)
            for p in g_params + d_params:
                if not np.all(np.isfinite(p.values)):
                    raise FloatingPointError("non-finite parameter after update")
        except (FloatingPointError, ValueError, ZeroDivisionError) as exc:
            raise TrainingDiverged(step, exc) from exc
        hist["d_loss"][step] = loss_d.item()
        hist["g_loss"][step] = loss_g.item()
        hist["mean_d_fake"][step] = mean_fake
        if step % 500 == 0:
            log.debug("step %d d_loss %.4f g_loss %.4f D(G(z)) %.3f", step,
                      hist["d_loss"][step], hist["g_loss"][step], mean_fake)
    return G, D, hist


def train_gan(ds: GroupedDataset, cfg: TrainConfig, rng: Rng | None = None,
              extra_generator_loss: Callable[[Tensor], Tensor] | None = None) -> TrainedGan:
    """Alternating Adam updates, one or more D steps then one G step per iteration.

    ``extra_generator_loss`` maps the fake batch to a scalar added to the
    generator objective (used by the boosted ensemble).
    """
    rng = rng if rng is not None else Rng(cfg.seed)
    G, D, hist = _fit(ds, cfg, rng, False, extra_generator_loss)
    return TrainedGan(G, D, hist, cfg)


def train_cgan(ds: GroupedDataset, cfg: TrainConfig, rng: Rng | None = None) -> TrainedCGan:
    rng = rng if rng is not None else Rng(cfg.seed)
    G, D, hist = _fit(ds, cfg, rng, True)
    return TrainedCGan(G, D, hist, cfg, ds.k, tuple(ds.proportions))


# -- sampling ---------------------------------------------------------------

def _as_generator(model) -> MlpNetwork:
    return model.generator if isinstance(model, TrainedGan) else model


def sample_generator(model, n: int, rng: Rng, condition: int | None = None) -> np.ndarray:
    """``n`` samples on fresh noise; ``condition`` is required iff the generator is conditional."""
    G = _as_generator(model)
    if n < 0:
        raise ValueError("n must be non-negative")
    if G.conditional and condition is None:
        raise ValueError("conditional generator needs a group label")
    if not G.conditional and condition is not None:
        raise ValueError("unconditional generator does not take a group label")
    if condition is not None and not 0 <= condition < G.n_groups:
        raise ValueError(f"group label {condition} out of range [0, {G.n_groups})")
    if n == 0:
        return np.empty((0, G.out_dim))
    noise = rng.normal((n, G.noise_dim))
    labels = None if condition is None else np.full(n, condition)
    out = G.predict(_gen_input(noise, labels, G.n_groups))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("generator produced non-finite samples")
    return out


def sample_by_proportions(cgan: TrainedCGan, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Unconditional use of a CGAN.

    Per-label counts follow the training proportions exactly (largest
    remainder), in shuffled order, so any group-rate error comes from the
    generator rather than from label sampling noise.
    """
    G = cgan.generator
    if n == 0:
        return np.empty((0, G.out_dim)), np.empty(0, dtype=int)
    counts = largest_remainder(cgan.proportions, n)
    labels = rng.gen.permutation(np.repeat(np.arange(len(counts)), counts))
    noise = rng.normal((n, G.noise_dim))
    return G.predict(_gen_input(noise, labels, G.n_groups)), labels


def write_history_csv(hist: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "d_loss", "g_loss", "mean_d_fake"])
        for i, row in enumerate(zip(hist["d_loss"], hist["g_loss"], hist["mean_d_fake"])):
            w.writerow([i, *[repr(float(v)) for v in row]])
