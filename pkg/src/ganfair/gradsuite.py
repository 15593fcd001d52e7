"""Finite-difference checks for every differentiable op and the composite losses.

Shared by the test-suite and the ``gradcheck`` CLI subcommand.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nx
from .ensemble import regularized_generator_loss, theta_regularizer
from .models import concat_condition, default_discriminator, default_generator, mlp_init
from .numerics import Rng, Tensor
from .training import gan_loss_discriminator, gan_loss_generator


def _leaf(rng: Rng, shape, low=-1.0, high=1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, shape), True)


def _sumsq(t: Tensor) -> Tensor:
    # weight the output so that every element influences the scalar differently
    w = Tensor(np.linspace(0.5, 1.5, t.size).reshape(t.shape))
    return nx.tsum(nx.mul(t, w))


def _case_unary(op):
    def make(rng):
        return [_leaf(rng, (3, 4))], lambda p: _sumsq(op(p[0]))
    return make


def _case_positive(op):
    def make(rng):
        return [_leaf(rng, (3, 4), 0.2, 2.0)], lambda p: _sumsq(op(p[0]))
    return make


def _case_binary(op):
    def make(rng):
        return [_leaf(rng, (3, 4)), _leaf(rng, (3, 4))], lambda p: _sumsq(op(p[0], p[1]))
    return make


def _case_bias(rng):
    return [_leaf(rng, (5, 3)), _leaf(rng, (1, 3))], lambda p: _sumsq(nx.add(p[0], p[1]))


def _case_matmul(rng):
    return [_leaf(rng, (3, 4)), _leaf(rng, (4, 2))], lambda p: _sumsq(nx.matmul(p[0], p[1]))


def _case_mean(rng):
    return [_leaf(rng, (4, 3))], lambda p: nx.mean(nx.mul(p[0], p[0]))


def _case_leaky(rng):
    # keep inputs away from the kink
    x = rng.uniform(0.05, 1.0, (3, 4)) * np.where(rng.uniform(0, 1, (3, 4)) > 0.5, 1, -1)
    return [Tensor(x, True)], lambda p: _sumsq(nx.leaky_relu(p[0]))


def _away_from(rng, shape, kinks, gap=0.05):
    x = rng.uniform(-1, 1, shape)
    for k in kinks:
        near = np.abs(x - k) < gap
        x = np.where(near, k + np.sign(x - k + 1e-12) * gap, x)
    return x


def _case_clamp(rng):
    x = _away_from(rng, (3, 4), (-0.5, 0.5))
    return [Tensor(x, True)], lambda p: _sumsq(nx.clamp(p[0], -0.5, 0.5))


def _case_floor(rng):
    x = _away_from(rng, (3, 4), (0.1,))
    return [Tensor(x, True)], lambda p: _sumsq(nx.maximum_const(p[0], 0.1))


def _case_scale_shift(rng):
    return [_leaf(rng, (3, 4))], lambda p: _sumsq(nx.shift(nx.scale(p[0], -1.7), 0.3))


def _case_cgan_discriminator(rng):
    D = default_discriminator(2, rng, n_groups=3, hidden=(5,))
    x = Tensor(rng.uniform(-2, 2, (6, 2)))
    labels = rng.integers(3, 6)
    return D.parameters(), lambda p: nx.mean(nx.log(D.forward(concat_condition(x, labels, 3))))


def _case_concat(rng):
    return [_leaf(rng, (3, 2)), _leaf(rng, (3, 3))], lambda p: _sumsq(nx.concat_cols(p[0], p[1]))


def _case_pairwise(rng):
    pts = rng.uniform(-1, 1, (4, 3))
    return [_leaf(rng, (5, 3))], lambda p: _sumsq(nx.pairwise_distances(pts, p[0]))


def _case_d_loss(rng):
    def f(p):
        return gan_loss_discriminator(nx.sigmoid(p[0]), nx.sigmoid(p[1]))
    return [_leaf(rng, (6, 1), -2, 2), _leaf(rng, (6, 1), -2, 2)], f


def _case_g_loss(mode):
    def make(rng):
        return [_leaf(rng, (6, 1), -2, 2)], lambda p: gan_loss_generator(nx.sigmoid(p[0]), mode)
    return make


def _case_theta(rng):
    memory = [rng.uniform(-2, 2, (5, 2)), rng.uniform(-2, 2, (4, 2))]
    return [_leaf(rng, (6, 2))], lambda p: theta_regularizer(memory, p[0], 0.7)


def _case_regularized(rng):
    memory = [rng.uniform(-2, 2, (5, 2))]
    logits = _leaf(rng, (6, 1), -2, 2)
    fakes = _leaf(rng, (6, 2))

    def f(p):
        return regularized_generator_loss(nx.sigmoid(p[0]), p[1], memory, 0.5)
    return [logits, fakes], f


def _case_mlp_loss(rng):
    net = mlp_init([2, 5, 3, 1], "tanh", "sigmoid", rng)
    x = Tensor(rng.uniform(-1, 1, (7, 2)))
    return net.parameters(), lambda p: nx.mean(nx.log(net.forward(x)))


def _case_gan_end_to_end(rng):
    G = default_generator(2, 2, rng, hidden=(6,))
    D = default_discriminator(2, rng, hidden=(6,))
    z = Tensor(rng.normal((5, 2)))

    def f(p):
        return gan_loss_generator(D.forward(G.forward(z)))
    return G.parameters(), f


CASES = {
    "matmul": _case_matmul,
    "add": _case_binary(nx.add),
    "add-bias": _case_bias,
    "sub": _case_binary(nx.sub),
    "mul": _case_binary(nx.mul),
    "neg": _case_unary(nx.neg),
    "exp": _case_unary(nx.exp),
    "log": _case_positive(nx.log),
    "sigmoid": _case_unary(nx.sigmoid),
    "tanh": _case_unary(nx.tanh),
    "leaky-relu": _case_leaky,
    "sqrt": _case_positive(nx.sqrt),
    "reciprocal": _case_positive(nx.reciprocal),
    "sum": _case_unary(lambda a: a),
    "mean": _case_mean,
    "clamp": _case_clamp,
    "floor": _case_floor,
    "scale-shift": _case_scale_shift,
    "concat": _case_concat,
    "pairwise-distances": _case_pairwise,
    "loss-discriminator": _case_d_loss,
    "loss-generator-nonsat": _case_g_loss("non-saturating"),
    "loss-generator-literal": _case_g_loss("literal-saturating"),
    "theta": _case_theta,
    "loss-regularized-generator": _case_regularized,
    "mlp-loss": _case_mlp_loss,
    "gan-generator-end-to-end": _case_gan_end_to_end,
    "cgan-discriminator": _case_cgan_discriminator,
}


def run_case(name: str, points: int = 20, seed: int = 0, eps: float = 1e-6) -> float:
    """Worst relative gradient error over ``points`` random evaluation points."""
    make = CASES[name]
    worst = 0.0
    for i in range(points):
        params, f = make(Rng(seed).derive(hash_name(name), i))
        worst = max(worst, nx.grad_check(f, params, eps))
    return worst


def hash_name(name: str) -> int:
    # stable across interpreter runs, unlike hash()
    return sum((i + 1) * ord(c) for i, c in enumerate(name))


def run_all(points: int = 20, seed: int = 0) -> dict[str, float]:
    return {name: run_case(name, points, seed) for name in CASES}
