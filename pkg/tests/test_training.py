import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganfair import numerics as nx
from ganfair.data import two_mode_mixture
from ganfair.models import load_mlp, save_mlp
from ganfair.numerics import AdamState, Rng, Tensor
from ganfair.training import (TrainConfig, discriminator_loss, draw_step, gan_loss_discriminator,
                              gan_loss_generator, generator_loss, init_networks,
                              sample_by_proportions, sample_generator, train_cgan, train_gan,
                              write_history_csv)

probs = st.floats(1e-6, 1 - 1e-6)


@pytest.fixture(scope="module")
def mixture():
    return two_mode_mixture((0.5, 0.5), 2000, Rng(0))


def test_discriminator_loss_values():
    assert gan_loss_discriminator([1 - 1e-7], [1e-7]).item() == pytest.approx(0, abs=1e-6)
    half = gan_loss_discriminator(np.full(8, 0.5), np.full(8, 0.5)).item()
    assert abs(half - 2 * math.log(2)) < 1e-12
    with pytest.raises(ValueError):
        gan_loss_discriminator([], [0.5])


@settings(max_examples=50)
@given(st.lists(probs, min_size=2, max_size=20), st.lists(probs, min_size=2, max_size=20), st.data())
def test_discriminator_loss_invariant_to_sample_order(real, fake, data):
    perm_r = data.draw(st.permutations(real))
    perm_f = data.draw(st.permutations(fake))
    a = gan_loss_discriminator(real, fake).item()
    b = gan_loss_discriminator(perm_r, perm_f).item()
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_generator_loss_values():
    assert abs(gan_loss_generator([0.5, 0.5]).item() - math.log(2)) < 1e-12
    assert gan_loss_generator([1 - 1e-7]).item() < 1e-6
    assert abs(gan_loss_generator([0.5], "literal-saturating").item() - math.log(2)) < 1e-12
    # literal form rewards a lower D(G(z))
    assert gan_loss_generator([0.1], "literal-saturating").item() < gan_loss_generator(
        [0.9], "literal-saturating").item()
    with pytest.raises(ValueError):
        gan_loss_generator([0.5], "wgan")


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(steps=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(lr_d=0)


def test_training_is_deterministic(mixture):
    cfg = TrainConfig(steps=40)
    a = train_gan(mixture, cfg, Rng(3))
    b = train_gan(mixture, cfg, Rng(3))
    for p, q in zip(a.generator.parameters() + a.discriminator.parameters(),
                    b.generator.parameters() + b.discriminator.parameters()):
        np.testing.assert_array_equal(p.values, q.values)
    np.testing.assert_array_equal(a.history["g_loss"], b.history["g_loss"])
    assert len(a.history["d_loss"]) == 40
    assert all(np.all(np.isfinite(v)) for v in a.history.values())


def test_different_seeds_differ(mixture):
    cfg = TrainConfig(steps=5)
    a = train_gan(mixture, cfg, Rng(1)).generator.weights[0].values
    b = train_gan(mixture, cfg, Rng(2)).generator.weights[0].values
    assert not np.array_equal(a, b)


def test_one_network_step_leaves_the_other_untouched(mixture):
    cfg = TrainConfig(steps=1)
    rng = Rng(0)
    G, D = init_networks(mixture, cfg, rng)
    draws = draw_step(mixture, cfg, rng, 0)
    g_before = [p.values.copy() for p in G.parameters()]
    d_before = [p.values.copy() for p in D.parameters()]

    loss = discriminator_loss(G, D, draws.real[0], None, draws.d_noise[0], None)
    nx.adam_step(D.parameters(), nx.backward(loss), AdamState(1e-2))
    for b, p in zip(g_before, G.parameters()):
        np.testing.assert_array_equal(b, p.values)
    assert any(not np.array_equal(b, p.values) for b, p in zip(d_before, D.parameters()))

    d_mid = [p.values.copy() for p in D.parameters()]
    loss, _ = generator_loss(G, D, draws.g_noise, None, "non-saturating")
    nx.adam_step(G.parameters(), nx.backward(loss), AdamState(1e-2))
    for b, p in zip(d_mid, D.parameters()):
        np.testing.assert_array_equal(b, p.values)


def test_history_replays_from_checkpoints(mixture, tmp_path):
    cfg_before = TrainConfig(steps=11)
    cfg_after = TrainConfig(steps=12)
    before = train_gan(mixture, cfg_before, Rng(8))
    after = train_gan(mixture, cfg_after, Rng(8))
    for name, net in [("g", before.generator), ("d0", before.discriminator), ("d1", after.discriminator)]:
        save_mlp(net, tmp_path / f"{name}.mlp")
    G = load_mlp(tmp_path / "g.mlp")
    D_pre, D_post = load_mlp(tmp_path / "d0.mlp"), load_mlp(tmp_path / "d1.mlp")
    draws = draw_step(mixture, cfg_after, Rng(8), 11)
    d_loss = discriminator_loss(G, D_pre, draws.real[0], None, draws.d_noise[0], None).item()
    g_loss, mean_fake = generator_loss(G, D_post, draws.g_noise, None, "non-saturating")
    assert abs(d_loss - after.history["d_loss"][11]) < 1e-9
    assert abs(g_loss.item() - after.history["g_loss"][11]) < 1e-9
    assert abs(mean_fake - after.history["mean_d_fake"][11]) < 1e-9
    np.testing.assert_array_equal(before.history["d_loss"], after.history["d_loss"][:11])


def test_equilibrium_band_on_default_mixture(mixture):
    gan = train_gan(mixture, TrainConfig(), Rng(0))
    tail = gan.history["mean_d_fake"][-100:].mean()
    assert 0.2 <= tail <= 0.8


def test_sample_generator_contract(mixture):
    gan = train_gan(mixture, TrainConfig(steps=5), Rng(0))
    assert sample_generator(gan, 0, Rng(1)).shape == (0, 2)
    s = sample_generator(gan, 1000, Rng(1))
    assert s.shape == (1000, 2) and np.all(np.isfinite(s))
    np.testing.assert_array_equal(s, sample_generator(gan, 1000, Rng(1)))
    with pytest.raises(ValueError):
        sample_generator(gan, 10, Rng(1), condition=0)


def test_cgan_contract(mixture):
    cfg = TrainConfig(steps=20)
    a = train_cgan(mixture, cfg, Rng(4))
    b = train_cgan(mixture, cfg, Rng(4))
    for p, q in zip(a.generator.parameters(), b.generator.parameters()):
        np.testing.assert_array_equal(p.values, q.values)
    assert a.generator.in_dim == cfg.noise_dim + 2
    assert a.discriminator.in_dim == 2 + 2
    assert sample_generator(a, 7, Rng(0), condition=1).shape == (7, 2)
    with pytest.raises(ValueError):
        sample_generator(a, 7, Rng(0), condition=2)
    with pytest.raises(ValueError):
        sample_generator(a, 7, Rng(0))
    x, labels = sample_by_proportions(a, 101, Rng(0))
    assert x.shape == (101, 2)
    assert np.bincount(labels).tolist() == [51, 50]


def test_history_csv(mixture, tmp_path):
    gan = train_gan(mixture, TrainConfig(steps=3), Rng(0))
    path = tmp_path / "h.csv"
    write_history_csv(gan.history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,d_loss,g_loss,mean_d_fake"
    assert len(lines) == 4
    assert float(lines[2].split(",")[1]) == gan.history["d_loss"][1]
