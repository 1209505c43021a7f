import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elcgen.gan import (Discriminator, DiscriminatorConfig, GanConfig, GanRun, Generator, GeneratorConfig,
                        OracleModel, adversarial_step, disc_loss_and_grad, divergences, generate, js_divergence,
                        kl_divergence, mc_rollout_q, nll_real, pretrain_mle, variant_configs)
from elcgen.gan.training import mle_loss_and_grad
from elcgen.nn import AdamState, grad_check
from elcgen.trajdata import QuantizerGrid
from gradcheck_cases import generator_case


def _gen(vocab=6, hidden=8, core="gru", attention=True, seed=0):
    return Generator(GeneratorConfig(vocab=vocab, embed=6, hidden=hidden, core=core, attention=attention),
                     np.random.default_rng(seed))


def _one_hot_head(gen, token):
    gen.store["gen.head.W"][...] = 0.0
    gen.store["gen.head.b"][...] = -50.0
    gen.store["gen.head.b"][token] = 50.0


@pytest.mark.parametrize("core,attention", [("gru", True), ("lstm", False), ("lstm", True), ("gru", False)])
def test_generator_mle_gradient(core, attention):
    loss, store = generator_case(core=core, attention=attention, length=8)
    assert grad_check(loss, store, floor=1e-5)[0] <= 1e-5


@pytest.mark.parametrize("kind", ["gru", "conv"])
def test_discriminator_gradient(kind):
    rng = np.random.default_rng(1)
    disc = Discriminator(DiscriminatorConfig(vocab=5, embed=3, hidden=4, kind=kind, widths=(2, 3), filters=3), rng)
    for p in disc.store.params.values():
        p[...] = rng.normal(0, 0.5, p.shape)
    real = rng.integers(0, 5, (3, 8))
    fake = rng.integers(0, 5, (3, 8))
    assert grad_check(lambda: disc_loss_and_grad(disc, real, fake)[0], disc.store, floor=1e-5)[0] <= 1e-5


def test_step_matches_teacher_forcing():
    gen = _gen(attention=True)
    seqs = np.random.default_rng(2).integers(0, 6, (3, 7))
    logits, _ = gen.forward(seqs)
    stepped = [(t, lg.copy()) for t, _, lg in gen.prefix_states(seqs)]
    for t, lg in stepped:
        np.testing.assert_allclose(lg, logits[:, t], atol=1e-12)


def test_pretrain_memorizes_single_sequence():
    gen = _gen()
    seq = np.array([[1, 3, 3, 0, 5, 2, 4, 4]])
    losses = pretrain_mle(gen, np.repeat(seq, 16, axis=0), 150, np.random.default_rng(0), AdamState(lr=0.02))
    assert losses[-1] < 0.01
    samples = gen.sample(20, 8, np.random.default_rng(1))
    assert (samples == seq).all(axis=1).mean() >= 0.9


def test_pretrain_zero_epochs_unchanged():
    gen = _gen()
    before = gen.store.snapshot()
    assert pretrain_mle(gen, np.zeros((4, 5), dtype=int), 0, np.random.default_rng(0)) == []
    for k, v in before.items():
        np.testing.assert_array_equal(gen.store[k], v)


def test_pretrain_rejects_bad_corpus():
    with pytest.raises(ValueError):
        pretrain_mle(_gen(), np.zeros((0, 5), dtype=int), 1, np.random.default_rng(0))


def test_pretrain_lowers_oracle_nll():
    oracle = OracleModel.random(32, np.random.default_rng(10), hidden=16, embed=8)
    corpus = oracle.sample(500, 20, np.random.default_rng(11))
    gen = Generator(GeneratorConfig(vocab=32, embed=16, hidden=16), np.random.default_rng(12))
    before = nll_real(oracle, gen.sample(300, 20, np.random.default_rng(13)))
    pretrain_mle(gen, corpus, 5, np.random.default_rng(14))
    after = nll_real(oracle, gen.sample(300, 20, np.random.default_rng(13)))
    assert after < before


def test_rollout_full_sequence_is_disc_score():
    gen = _gen()
    disc = Discriminator(DiscriminatorConfig(vocab=6, embed=4, hidden=5), np.random.default_rng(3))
    seq = np.array([0, 1, 2, 3, 4])
    q = mc_rollout_q(gen, seq, disc, 8, np.random.default_rng(0), 5)
    assert q == disc.prob(seq[None])[0]


def test_rollout_deterministic_generator():
    gen = _gen()
    _one_hot_head(gen, 2)
    disc = Discriminator(DiscriminatorConfig(vocab=6, embed=4, hidden=5), np.random.default_rng(3))
    q, vals = mc_rollout_q(gen, [1, 5], disc, 16, np.random.default_rng(0), 6, return_samples=True)
    assert np.ptp(vals) == 0.0
    assert q == pytest.approx(disc.prob(np.array([[1, 5, 2, 2, 2, 2]]))[0], abs=1e-15)


def test_rollout_estimates_converge():
    gen = _gen(seed=4)
    disc = Discriminator(DiscriminatorConfig(vocab=6, embed=4, hidden=5), np.random.default_rng(5))
    for p in disc.store.params.values():
        p *= 4.0
    prefix = [3, 1]
    q16, s16 = mc_rollout_q(gen, prefix, disc, 16, np.random.default_rng(6), 10, return_samples=True)
    q256, s256 = mc_rollout_q(gen, prefix, disc, 256, np.random.default_rng(7), 10, return_samples=True)
    ref = mc_rollout_q(gen, prefix, disc, 10000, np.random.default_rng(8), 10)
    assert abs(q16 - q256) <= 3 * s16.std(ddof=1) / 4
    assert abs(q256 - ref) <= s256.std(ddof=1) / 16


def test_constant_discriminator_leaves_generator():
    gen = _gen()
    disc = Discriminator(DiscriminatorConfig(vocab=6, embed=4, hidden=5), np.random.default_rng(3))
    disc.store["disc.head.W"][...] = 0.0
    disc.store["disc.head.b"][...] = 0.0
    before = gen.store.snapshot()
    cfg = GanConfig(seq_len=6, batch=8, adv_batch=8, rollouts=4, disc_steps=1)
    adversarial_step(gen, disc, np.zeros((10, 6), dtype=int), cfg, np.random.default_rng(0), AdamState(),
                     AdamState())
    for k, v in before.items():
        np.testing.assert_allclose(gen.store[k], v, atol=1e-12)


def test_untrained_disc_loss_near_ln2():
    disc = Discriminator(DiscriminatorConfig(vocab=6, embed=4, hidden=5), np.random.default_rng(3))
    rng = np.random.default_rng(0)
    loss, clipped = disc_loss_and_grad(disc, rng.integers(0, 6, (64, 8)), rng.integers(0, 6, (64, 8)))
    assert loss == pytest.approx(math.log(2), abs=0.05)
    assert clipped == 0
    disc.store["disc.head.W"][...] = 0.0
    disc.store["disc.head.b"][...] = 0.0
    loss, _ = disc_loss_and_grad(disc, rng.integers(0, 6, (4, 8)), rng.integers(0, 6, (4, 8)))
    assert loss == pytest.approx(math.log(2), abs=1e-15)


def test_nll_uniform_oracle():
    gen = Generator(GeneratorConfig(vocab=2, embed=2, hidden=2, attention=False), np.random.default_rng(0))
    for p in gen.store.params.values():
        p[...] = 0.0
    oracle = OracleModel(gen)
    samples = np.array([[0, 1, 1], [1, 1, 0]])
    assert nll_real(oracle, samples) == pytest.approx(3 * math.log(2), abs=1e-12)
    with pytest.raises(ValueError):
        nll_real(oracle, np.zeros((0, 3), dtype=int))


def test_gibbs_cross_entropy():
    oracle = OracleModel.random(8, np.random.default_rng(20), hidden=8, embed=4)
    other = OracleModel.random(8, np.random.default_rng(21), hidden=8, embed=4)
    samples = oracle.sample(4000, 10, np.random.default_rng(22))
    own = nll_real(oracle, samples)
    cross = nll_real(other, samples)
    assert own < cross


def test_divergence_examples():
    p = np.array([0.2, 0.3, 0.5])
    d = divergences(p, p)
    assert d["kl"] == 0.0 and d["jsd"] == 0.0
    assert js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert math.isinf(kl_divergence([0.5, 0.5], [1.0, 0.0]))
    assert divergences([0.5, 0.5], [1.0, 0.0])["kl_infinite"]
    with pytest.raises(ValueError):
        divergences([0.5, 0.6], [0.5, 0.5])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=12), st.lists(st.floats(0, 1), min_size=2, max_size=12))
def test_jsd_symmetric_bounded(a, b):
    n = min(len(a), len(b))
    p, q = np.array(a[:n]) + 1e-3, np.array(b[:n]) + 1e-3
    p, q = p / p.sum(), q / q.sum()
    j1, j2 = js_divergence(p, q), js_divergence(q, p)
    assert abs(j1 - j2) <= 1e-12
    assert -1e-15 <= j1 <= math.log(2) + 1e-12


def test_generate_reproducible_and_mode():
    gen = _gen()
    a = generate(gen, 5, 7, np.random.default_rng(3))
    b = generate(gen, 5, 7, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    _one_hot_head(gen, 4)
    np.testing.assert_array_equal(generate(gen, 1, 5, np.random.default_rng(0), greedy=True), [[4] * 5])
    g = QuantizerGrid(x_bins=2, v_bins=3)
    trajs = generate(gen, 2, 5, np.random.default_rng(0), grid=g, dt=0.05)
    assert len(trajs) == 2 and trajs[0].dt == 0.05


def test_variant_flags():
    g, d = variant_configs(32, "vanilla")
    assert (d.kind, g.attention, g.core) == ("conv", False, "lstm")
    g, d = variant_configs(32, "ga")
    assert (d.kind, g.attention, g.core) == ("gru", True, "gru")
    g, d = variant_configs(32, "ga", disc="conv", attention=False)
    assert (d.kind, g.attention) == ("conv", False)


def test_resume_equivalence(tmp_path):
    oracle = OracleModel.random(8, np.random.default_rng(30), hidden=8, embed=4)
    corpus = oracle.sample(40, 6, np.random.default_rng(31))
    g, d = variant_configs(8, "ga", embed=4, hidden=6)
    cfg = GanConfig(seq_len=6, batch=16, pretrain_epochs=3, disc_pretrain_steps=2, adv_rounds=3, adv_batch=8,
                    rollouts=2, eval_samples=20, eval_every=1)
    full = GanRun.create(g, d, cfg, seed=5)
    full.run(corpus, oracle)
    part = GanRun.create(g, d, cfg, seed=5)
    part.run(corpus, oracle, stop_after=4)
    part.save(str(tmp_path))
    resumed = GanRun.load(str(tmp_path))
    resumed.run(corpus, oracle)
    assert [r["nll_real"] for r in resumed.rows] == [r["nll_real"] for r in full.rows]
    for k in full.gen.store:
        np.testing.assert_array_equal(full.gen.store[k], resumed.gen.store[k])


def test_mle_lr_schedule():
    g, d = variant_configs(8, "ga", embed=4, hidden=6)
    run = GanRun.create(g, d, GanConfig(pretrain_epochs=5, pretrain_lr=1e-2, pretrain_lr_final=1e-4), 0)
    assert run.mle_lr(0) == pytest.approx(1e-2)
    assert run.mle_lr(4) == pytest.approx(1e-4)
    assert run.mle_lr(2) == pytest.approx(1e-3)
    flat = GanRun.create(g, d, GanConfig(pretrain_epochs=5, pretrain_lr=1e-2), 0)
    assert flat.mle_lr(3) == 1e-2
