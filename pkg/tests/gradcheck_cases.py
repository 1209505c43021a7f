"""Loss closures shared by the gradient unit tests and the acceptance gate."""

import numpy as np

from elcgen.gan import Generator, GeneratorConfig
from elcgen.gan.training import mle_loss_and_grad
from elcgen.nn import Attention, GRUCell, LSTMCell, ParamStore
from elcgen.vaa.buffer import Minibatch
from elcgen.vaa.policy import PolicyConfig, PolicyModel, ppo_loss

EPS = 1e-5
TOL = 1e-5


def gru_case(steps=20, batch=2, inp=3, hidden=4, seed=0):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    cell = GRUCell(store, "gru", inp, hidden, rng)
    for k in store.params:
        store.params[k][...] = rng.normal(0, 0.5, store.params[k].shape)
    X = rng.normal(size=(steps, batch, inp))
    proj = rng.normal(size=(steps, batch, hidden))

    def loss():
        store.zero_grad()
        h = np.zeros((batch, hidden))
        caches, total = [], 0.0
        for t in range(steps):
            h, c = cell.step(h, X[t])
            caches.append(c)
            total += float(np.sum(proj[t] * h))
        dh = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            dh, _ = cell.backward(caches[t], dh + proj[t])
        return total

    return loss, store


def lstm_case(steps=20, batch=2, inp=3, hidden=4, seed=1):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    cell = LSTMCell(store, "lstm", inp, hidden, rng)
    store.params["lstm.W"][...] = rng.normal(0, 0.5, store.params["lstm.W"].shape)
    store.params["lstm.b"][...] = rng.normal(0, 0.5, store.params["lstm.b"].shape)
    X = rng.normal(size=(steps, batch, inp))
    proj = rng.normal(size=(steps, batch, hidden))
    cproj = rng.normal(size=(batch, hidden))

    def loss():
        store.zero_grad()
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        caches, total = [], 0.0
        for t in range(steps):
            h, c, cc = cell.step(h, c, X[t])
            caches.append(cc)
            total += float(np.sum(proj[t] * h))
        total += float(np.sum(cproj * c))
        dh = np.zeros((batch, hidden))
        dc = cproj.copy()
        for t in range(steps - 1, -1, -1):
            dh, dc, _ = cell.backward(caches[t], dh + proj[t], dc)
        return total

    return loss, store


def attention_case(T=6, batch=2, qdim=3, sdim=4, adim=5, seed=2):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    att = Attention(store, "att", qdim, sdim, adim, rng)
    h = rng.normal(size=(batch, qdim))
    S = rng.normal(size=(batch, T, sdim))
    proj = rng.normal(size=(batch, sdim))

    def loss():
        store.zero_grad()
        _, ctx, cache = att.step(h, S)
        att.backward(cache, proj)
        return float(np.sum(proj * ctx))

    return loss, store


def generator_case(core="gru", attention=True, length=20, batch=3, vocab=7, seed=3):
    """Full generator (embedding, core, attention, softmax head) under the MLE loss."""
    rng = np.random.default_rng(seed)
    gen = Generator(GeneratorConfig(vocab=vocab, embed=4, hidden=5, core=core, attention=attention), rng)
    for p in gen.store.params.values():
        p[...] = rng.normal(0, 0.4, p.shape)
    seqs = rng.integers(0, vocab, size=(batch, length))
    return (lambda: mle_loss_and_grad(gen, seqs)), gen.store


def ppo_case(steps=20, batch=2, obs_dim=5, hidden=4, seed=4, perturb=0.05):
    """Clipped PPO loss with BPTT through the recurrent trunk."""
    rng = np.random.default_rng(seed)
    policy = PolicyModel(PolicyConfig(obs_dim=obs_dim, hidden=hidden, init_log_std=-0.3), rng)
    for k, p in policy.store.params.items():
        if k != "log_std":
            p[...] = rng.normal(0, 0.4, p.shape)
    obs = rng.normal(size=(batch, steps, obs_dim))
    h0 = policy.initial_state(batch)
    mean, _, _ = policy.sequence(h0, obs)
    actions = mean + rng.normal(0, 0.5, mean.shape)
    old_logp = policy.log_prob(mean, actions) + rng.normal(0, perturb, size=(batch, steps))
    mb = Minibatch(obs=obs, actions=actions, old_logp=old_logp, advantages=rng.normal(size=(batch, steps)),
                   returns=rng.normal(size=(batch, steps)), mask=np.ones((batch, steps)), h0=h0)

    def loss():
        policy.store.zero_grad()
        return ppo_loss(policy, mb)[0]

    return loss, policy.store


CASES = {
    "gru_bptt20": gru_case,
    "lstm_bptt20": lstm_case,
    "attention": attention_case,
    "generator_head_gru_attention": generator_case,
    "generator_lstm": lambda: generator_case(core="lstm", attention=False),
    "ppo_loss_bptt20": ppo_case,
}
