"""Recurrent Gaussian policy with a value head, and the clipped PPO loss."""

import math
from dataclasses import dataclass

import numpy as np

from ..nn import GRUCell, Linear, ParamStore

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
ACTION_DIM = 2
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PolicyConfig:
    obs_dim: int = 17
    hidden: int = 32
    init_log_std: float = -0.5


class PolicyModel:
    """GRU trunk shared by a Gaussian action head and a scalar value head.

    The log standard deviation is a state-independent parameter vector,
    clipped to [−5, 1] in the forward pass (zero gradient outside).
    """

    def __init__(self, cfg=None, rng=None):
        self.cfg = cfg or PolicyConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        c = self.cfg
        self.store = ParamStore()
        self.gru = GRUCell(self.store, "trunk", c.obs_dim, c.hidden, rng)
        self.mu = Linear(self.store, "mu", c.hidden, ACTION_DIM, rng)
        self.value = Linear(self.store, "value", c.hidden, 1, rng)
        self.mu.W *= 0.1
        self.log_std = self.store.add("log_std", np.full(ACTION_DIM, c.init_log_std))

    def initial_state(self, batch=1):
        return np.zeros((batch, self.cfg.hidden))

    def clipped_log_std(self):
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def step(self, h, obs):
        """One recurrent step: returns (h_new, mean (B, 2), value (B,))."""
        obs = np.atleast_2d(obs)
        h_new, _ = self.gru.step(h, obs)
        mean, _ = self.mu.forward(h_new)
        v, _ = self.value.forward(h_new)
        return h_new, mean, v[:, 0]

    def log_prob(self, mean, actions):
        ls = self.clipped_log_std()
        z = (actions - mean) / np.exp(ls)
        return np.sum(-0.5 * z * z - ls - 0.5 * _LOG_2PI, axis=-1)

    def entropy(self):
        return float(np.sum(self.clipped_log_std() + 0.5 * (_LOG_2PI + 1.0)))

    def act(self, h, obs, rng, deterministic=False):
        """Sample an action; returns (h_new, action (2,), log_prob, value)."""
        h_new, mean, v = self.step(h, obs)
        if deterministic:
            a = mean[0].copy()
        else:
            a = mean[0] + np.exp(self.clipped_log_std()) * rng.standard_normal(ACTION_DIM)
        return h_new, a, float(self.log_prob(mean, a[None])[0]), float(v[0])

    def sequence(self, h0, obs):
        """Run a padded batch of segments: obs (B, T, D) from hidden h0 (B, H).

        Returns means (B, T, 2), values (B, T) and the per-step caches.
        """
        B, T, _ = obs.shape
        h = h0
        means = np.empty((B, T, ACTION_DIM))
        values = np.empty((B, T))
        caches = []
        for t in range(T):
            h, gcache = self.gru.step(h, obs[:, t])
            m, _ = self.mu.forward(h)
            v, _ = self.value.forward(h)
            means[:, t] = m
            values[:, t] = v[:, 0]
            caches.append((gcache, h))
        return means, values, caches


@dataclass
class Minibatch:
    """Padded segments. ``mask`` marks real steps; everything else is aligned to it."""
    obs: np.ndarray       # (B, T, D)
    actions: np.ndarray   # (B, T, 2)
    old_logp: np.ndarray  # (B, T)
    advantages: np.ndarray
    returns: np.ndarray
    mask: np.ndarray
    h0: np.ndarray        # (B, H)


def ppo_loss(policy, mb, eps_clip=0.2, ent_coef=0.01, vf_coef=0.5, backward=True):
    """Clipped-surrogate loss with value regression and an entropy bonus.

    loss = −mean(min(r·A, clip(r, 1−ε, 1+ε)·A)) + vf_coef·mean((V − R)²) − ent_coef·H.
    Means run over real (masked) steps.  With ``backward`` the gradients are
    accumulated into ``policy.store.grads`` (zeroed first).  Segments whose
    ratio is non-finite are excluded and counted in ``stats['rejected']``.
    """
    store = policy.store
    if backward:
        store.zero_grad()
    means, values, caches = policy.sequence(mb.h0, mb.obs)
    ls = policy.clipped_log_std()
    std = np.exp(ls)
    z = (mb.actions - means) / std
    logp = np.sum(-0.5 * z * z - ls - 0.5 * _LOG_2PI, axis=-1)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(logp - mb.old_logp)
    mask = mb.mask.astype(np.float64).copy()
    bad = ~np.all(np.isfinite(ratio) | (mask == 0), axis=1)
    rejected = int(bad.sum())
    mask[bad] = 0.0
    ratio = np.where(mask > 0, ratio, 1.0)
    n = mask.sum()
    if n == 0:
        return 0.0, {"clip_fraction": 0.0, "approx_kl": 0.0, "entropy": policy.entropy(), "rejected": rejected,
                     "policy_loss": 0.0, "value_loss": 0.0}
    A = mb.advantages
    clipped = np.clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip)
    s1, s2 = ratio * A, clipped * A
    use_unclipped = s1 <= s2
    surr = np.where(use_unclipped, s1, s2)
    pg_loss = -float(np.sum(surr * mask) / n)
    verr = values - mb.returns
    v_loss = float(np.sum(verr * verr * mask) / n)
    ent = policy.entropy()
    loss = pg_loss + vf_coef * v_loss - ent_coef * ent
    stats = {
        "policy_loss": pg_loss,
        "value_loss": v_loss,
        "entropy": ent,
        "clip_fraction": float(np.sum((np.abs(ratio - 1.0) > eps_clip) * mask) / n),
        "approx_kl": float(np.sum((mb.old_logp - logp) * mask) / n),
        "rejected": rejected,
    }
    if not backward:
        return loss, stats

    # d loss / d logp through the active branch of the min
    dlogp = np.where(use_unclipped, -ratio * A, 0.0) * mask / n
    dmean = (dlogp[..., None] * z / std)
    dls = np.sum(dlogp[..., None] * (z * z - 1.0), axis=(0, 1)) - ent_coef
    inside = (policy.log_std >= LOG_STD_MIN) & (policy.log_std <= LOG_STD_MAX)
    store.grads["log_std"] += np.where(inside, dls, 0.0)
    dval = vf_coef * 2.0 * verr * mask / n
    B, T = mask.shape
    dh = np.zeros_like(mb.h0)
    for t in range(T - 1, -1, -1):
        gcache, h = caches[t]
        dh = dh + policy.mu.backward(h, dmean[:, t])
        dh = dh + policy.value.backward(h, dval[:, t][:, None])
        dh, _ = policy.gru.backward(gcache, dh)
    return loss, stats
