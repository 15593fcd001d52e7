"""Small reverse-mode autodiff over dense float64 arrays.

Graphs are rebuilt every training step; a :class:`Tensor` keeps references to
its parents and a closure that pushes its upstream gradient back to them.
Only row-wise bias broadcasting is supported, every other binary op needs
exactly matching shapes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_node_ids = itertools.count()

DEFAULT_LEAKY_ALPHA = 0.2


class Tensor:
    """A node in a computation graph."""

    __slots__ = ("values", "requires_grad", "node_id", "op", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, *, op: str = "leaf",
                 parents: tuple = (), backward: Callable | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"{op}: non-finite value produced")
        self.values = arr
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() needs a single value, shape is {self.shape}")
        return float(self.values.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # operator sugar; scalars on the right are treated as constants
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else shift(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else shift(self, -other)

    def __rsub__(self, other):
        return shift(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(values, op: str, parents: tuple, backward: Callable) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(values, needs, op=op, parents=parents if needs else (),
                  backward=backward if needs else None)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    # row-broadcast bias: (1, n) against (m, n)
    return grad.sum(axis=0, keepdims=True).reshape(shape)


def _check_binary(op: str, a: Tensor, b: Tensor, allow_bias: bool) -> None:
    if a.shape == b.shape:
        return
    if (allow_bias and a.values.ndim == 2 and b.values.ndim == 2
            and b.shape[0] == 1 and b.shape[1] == a.shape[1]):
        return
    raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    out = a.values @ b.values

    def backward(g):
        return (g @ b.values.T, a.values.T @ g)

    return _make(out, "matmul", (a, b), backward)


# -- elementwise binary -------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("add", a, b, allow_bias=True)

    def backward(g):
        return (g, _unbroadcast(g, b.shape))

    return _make(a.values + b.values, "add", (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("sub", a, b, allow_bias=True)

    def backward(g):
        return (g, -_unbroadcast(g, b.shape))

    return _make(a.values - b.values, "sub", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("mul", a, b, allow_bias=False)

    def backward(g):
        return (g * b.values, g * a.values)

    return _make(a.values * b.values, "mul", (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.values * c, "scale", (a,), lambda g: (g * c,))


def shift(a: Tensor, c: float) -> Tensor:
    return _make(a.values + float(c), "shift", (a,), lambda g: (g,))


# -- elementwise unary ----------------------------------------------------

def neg(a: Tensor) -> Tensor:
    return _make(-a.values, "neg", (a,), lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.values)
    return _make(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    if np.any(a.values <= 0):
        raise ValueError("log: non-positive input")
    x = a.values
    return _make(np.log(x), "log", (a,), lambda g: (g / x,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _make(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)
    return _make(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def leaky_relu(a: Tensor, alpha: float = DEFAULT_LEAKY_ALPHA) -> Tensor:
    slope = np.where(a.values > 0, 1.0, alpha)
    return _make(a.values * slope, "leaky_relu", (a,), lambda g: (g * slope,))


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.values < 0):
        raise ValueError("sqrt: negative input")
    out = np.sqrt(a.values)
    return _make(out, "sqrt", (a,), lambda g: (g / (2.0 * out),))


def reciprocal(a: Tensor) -> Tensor:
    if np.any(a.values == 0):
        raise ZeroDivisionError("reciprocal: zero input")
    out = 1.0 / a.values
    return _make(out, "reciprocal", (a,), lambda g: (-g * out * out,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip into [lo, hi]; gradient is zero where clipping engaged."""
    x = a.values
    inside = (x >= lo) & (x <= hi)
    return _make(np.clip(x, lo, hi), "clamp", (a,), lambda g: (g * inside,))


def maximum_const(a: Tensor, floor: float) -> Tensor:
    x = a.values
    keep = x >= floor
    return _make(np.maximum(x, floor), "maximum", (a,), lambda g: (g * keep,))


ELEMENTWISE_UNARY = {
    "neg": neg,
    "exp": exp,
    "log": log,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "leaky-relu": leaky_relu,
}
ELEMENTWISE_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(kind: str, a: Tensor, b: Tensor | None = None, *, alpha: float = DEFAULT_LEAKY_ALPHA) -> Tensor:
    """Dispatch an elementwise op by name."""
    if kind in ELEMENTWISE_BINARY:
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        return ELEMENTWISE_BINARY[kind](a, b)
    if kind == "leaky-relu":
        return leaky_relu(a, alpha)
    if kind in ELEMENTWISE_UNARY:
        return ELEMENTWISE_UNARY[kind](a)
    raise ValueError(f"unknown elementwise kind {kind!r}")


# -- structural ---------------------------------------------------------------

def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_cols: row mismatch {a.shape} vs {b.shape}")
    split = a.shape[1]

    def backward(g):
        return (g[:, :split], g[:, split:])

    return _make(np.concatenate([a.values, b.values], axis=1), "concat", (a, b), backward)


def pairwise_distances(points: np.ndarray, a: Tensor) -> Tensor:
    """Euclidean distances between fixed ``points`` (p x d) and rows of ``a`` (n x d).

    Result is p x n. The gradient at a zero distance is taken as zero.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or a.values.ndim != 2 or pts.shape[1] != a.shape[1]:
        raise ValueError(f"pairwise_distances: dims {pts.shape} vs {a.shape}")
    diff = a.values[None, :, :] - pts[:, None, :]
    dist = np.sqrt(np.einsum("pnd,pnd->pn", diff, diff))

    def backward(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(dist > 0, g / dist, 0.0)
        return (np.einsum("pn,pnd->nd", w, diff),)

    return _make(dist, "pairwise_distances", (a,), backward)


# -- reductions -------------------------------------------------------------

def reduce(kind: str, a: Tensor) -> Tensor:
    if a.size == 0:
        raise ValueError(f"{kind}: empty input")
    shape = a.shape
    if kind == "sum":
        return _make(a.values.sum(), "sum", (a,), lambda g: (np.full(shape, g),))
    if kind == "mean":
        n = a.size
        return _make(a.values.sum() / n, "mean", (a,), lambda g: (np.full(shape, g / n),))
    raise ValueError(f"unknown reduction {kind!r}")


def tsum(a: Tensor) -> Tensor:
    return reduce("sum", a)


def mean(a: Tensor) -> Tensor:
    return reduce("mean", a)


# -- backward ---------------------------------------------------------------

class GradientMap(dict):
    """Gradients keyed by node id; ``grads[tensor]`` also works."""

    def __getitem__(self, key):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().__getitem__(key)

    def get_for(self, t: Tensor) -> np.ndarray:
        return self.get(t.node_id, np.zeros_like(t.values))


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for p in node._parents:
            if p.node_id not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> GradientMap:
    """Gradients of a scalar ``root`` w.r.t. every requires-grad leaf."""
    if root.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
    grads: dict[int, np.ndarray] = {root.node_id: np.ones_like(root.values)}
    out = GradientMap()
    if not root.requires_grad:
        return out
    for node in reversed(_topo_order(root)):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node._backward is None:
            if node.requires_grad:
                out[node.node_id] = g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = pg
    return out


def grad_check(f: Callable[[Sequence[Tensor]], Tensor], params: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Max relative gap between backprop gradients and central differences.

    ``f`` must rebuild its graph from ``params`` on every call. The error per
    coordinate is ``|analytic - numeric| / max(1, |analytic|)``.
    """
    root = f(params)
    grads = backward(root)
    worst = 0.0
    for p in params:
        analytic = grads.get_for(p)
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(params).item()
            flat[i] = orig - eps
            down = f(params).item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError("grad_check: non-finite evaluation")
            numeric = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst


# -- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("Adam learning rate must be positive")


def adam_step(params: Sequence[Tensor], grads: GradientMap, state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place.

    Parameters without an entry in ``grads`` get a zero gradient.
    """
    if not state.m:
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
    if len(state.m) != len(params):
        raise ValueError("adam_step: parameter count changed between steps")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for i, p in enumerate(params):
        g = grads.get_for(p)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ValueError(f"adam_step: shape mismatch for parameter {i}")
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.values = p.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


# -- randomness ----------------------------------------------------------------

class Rng:
    """Counter-based (Philox) generator addressable by a key path.

    ``Rng(seed).derive(a, b)`` always yields the same stream, independent of
    how much the parent has been consumed.
    """

    def __init__(self, seed: int, path: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(int(k) for k in path)
        ss = np.random.SeedSequence([self.seed, *self.path])
        self.gen = np.random.Generator(np.random.Philox(ss))

    def derive(self, *keys: int) -> "Rng":
        return Rng(self.seed, self.path + keys)

    def normal(self, shape) -> np.ndarray:
        return self.gen.standard_normal(shape)

    def uniform(self, low, high, shape) -> np.ndarray:
        return self.gen.uniform(low, high, shape)

    def integers(self, high: int, size) -> np.ndarray:
        return self.gen.integers(0, high, size=size)

    def choice(self, p: np.ndarray, size=None):
        return self.gen.choice(len(p), size=size, p=p)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path})"


def rng_standard_normal(shape, rng: Rng) -> Tensor:
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s <= 0 for s in shape):
        raise ValueError(f"rng_standard_normal: dimensions must be positive, got {shape}")
    return Tensor(rng.normal(shape))
