"""MLP generator/discriminator networks and label conditioning."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as nx
from .numerics import Rng, Tensor

HIDDEN_KINDS = ("tanh", "leaky-relu", "sigmoid", "identity")
OUTPUT_KINDS = ("sigmoid", "tanh", "identity")

# keeps log D and log(1 - D) finite
PROB_CLAMP = 1e-7


def _activate(kind: str, x: Tensor) -> Tensor:
    if kind == "identity":
        return x
    return nx.elementwise(kind, x)


def _activate_np(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "identity":
        return x
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        e = np.exp(-np.abs(x))
        return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    if kind == "leaky-relu":
        return x * np.where(x > 0, 1.0, nx.DEFAULT_LEAKY_ALPHA)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class MlpNetwork:
    sizes: list[int]
    hidden: str
    output: str
    weights: list[Tensor] = field(repr=False)
    biases: list[Tensor] = field(repr=False)
    # metadata carried into checkpoints; zero for plain networks
    noise_dim: int = 0
    n_groups: int = 0

    def __post_init__(self):
        if self.hidden not in HIDDEN_KINDS:
            raise ValueError(f"unknown hidden activation {self.hidden!r}")
        if self.output not in OUTPUT_KINDS:
            raise ValueError(f"unknown output activation {self.output!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (1, self.sizes[i + 1]):
                raise ValueError(f"layer {i}: parameter shapes do not match sizes {self.sizes}")

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def conditional(self) -> bool:
        return self.n_groups > 0

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            list(self.sizes), self.hidden, self.output,
            [Tensor(w.values.copy(), True) for w in self.weights],
            [Tensor(b.values.copy(), True) for b in self.biases],
            self.noise_dim, self.n_groups,
        )

    def forward(self, x: Tensor) -> Tensor:
        return mlp_forward(self, x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Graph-free forward pass on a plain array."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"input width {x.shape} does not match {self.in_dim}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w.values + b.values
            x = _activate_np(self.output if i == last else self.hidden, x)
        return x


def mlp_init(sizes: Sequence[int], hidden: str, output: str, rng: Rng, *,
             noise_dim: int = 0, n_groups: int = 0) -> MlpNetwork:
    """Glorot-uniform weights, zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ValueError("an MLP needs at least two layer sizes")
    if any(s <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive: {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(Tensor(rng.uniform(-s, s, (fan_in, fan_out)), True))
        biases.append(Tensor(np.zeros((1, fan_out)), True))
    return MlpNetwork(sizes, hidden, output, weights, biases, noise_dim, n_groups)


def mlp_forward(net: MlpNetwork, x: Tensor) -> Tensor:
    if x.values.ndim != 2 or x.shape[1] != net.in_dim:
        raise ValueError(f"input width {x.shape} does not match first layer {net.in_dim}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = nx.add(nx.matmul(x, w), b)
        x = _activate(net.output if i == last else net.hidden, x)
    return x


def default_generator(noise_dim: int, data_dim: int, rng: Rng, n_groups: int = 0,
                      hidden: Sequence[int] = (32, 32)) -> MlpNetwork:
    return mlp_init([noise_dim + n_groups, *hidden, data_dim], "tanh", "identity", rng,
                    noise_dim=noise_dim, n_groups=n_groups)


def default_discriminator(data_dim: int, rng: Rng, n_groups: int = 0,
                          hidden: Sequence[int] = (32, 32)) -> MlpNetwork:
    return mlp_init([data_dim + n_groups, *hidden, 1], "leaky-relu", "sigmoid", rng,
                    n_groups=n_groups)


def one_hot(labels, k: int) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels))
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"group label out of range [0, {k})")
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels.astype(int)] = 1.0
    return out


def concat_condition(x: Tensor, label, k: int) -> Tensor:
    """Append the one-hot code of ``label`` to each row of ``x``.

    ``label`` may be a single group id (applied to every row) or one id per row.
    """
    n = x.shape[0]
    if np.ndim(label) == 0:
        if not 0 <= int(label) < k:
            raise ValueError(f"group label {label} out of range [0, {k})")
        code = np.tile(one_hot([int(label)], k), (n, 1))
    else:
        code = one_hot(label, k)
        if code.shape[0] != n:
            raise ValueError("one label per row required")
    return nx.concat_cols(x, Tensor(code))


# -- checkpoint file ----------------------------------------------------------

def save_mlp(net: MlpNetwork, path) -> None:
    lines = ["mlp " + " ".join(str(s) for s in net.sizes)]
    meta = f"{net.hidden} {net.output}"
    if net.noise_dim or net.n_groups:
        meta += f" noise={net.noise_dim} groups={net.n_groups}"
    lines.append(meta)
    for w, b in zip(net.weights, net.biases):
        for row in w.values:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in b.values[0]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mlp(path) -> MlpNetwork:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = text[0].split()
    if not head or head[0] != "mlp":
        raise ValueError(f"{path}: not an mlp checkpoint")
    sizes = [int(s) for s in head[1:]]
    meta = text[1].split()
    hidden, output = meta[0], meta[1]
    extras = dict(tok.split("=", 1) for tok in meta[2:])
    rows = iter(text[2:])
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        w = np.array([[float(v) for v in next(rows).split()] for _ in range(fan_in)])
        b = np.array([[float(v) for v in next(rows).split()]])
        weights.append(Tensor(w, True))
        biases.append(Tensor(b, True))
    return MlpNetwork(sizes, hidden, output, weights, biases,
                      int(extras.get("noise", 0)), int(extras.get("groups", 0)))
