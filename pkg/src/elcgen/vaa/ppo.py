"""PPO update loop and a 1-D toy task for smoke-testing it."""

from dataclasses import asdict, dataclass

import numpy as np

from ..nn import AdamState, adam_update
from .buffer import BufferUnderfullError, RolloutBuffer, compute_advantages, minibatches, normalize
from .policy import ppo_loss


@dataclass
class PpoHyper:
    lr: float = 3e-4
    steps_per_update: int = 1280
    minibatch_steps: int = 128
    epochs: int = 20
    ent_coef: float = 0.01
    gamma: float = 0.99
    eps_clip: float = 0.2
    vf_coef: float = 0.5
    segment_len: int = 16
    clip_norm: float = 0.5

    def to_dict(self):
        return asdict(self)


def update(policy, buffer, hyper, opt, rng):
    """Run ``hyper.epochs`` passes of minibatch PPO over ``buffer``; returns per-epoch stats."""
    if len(buffer) < hyper.steps_per_update:
        raise BufferUnderfullError(f"buffer holds {len(buffer)} steps, need {hyper.steps_per_update}")
    opt.lr = hyper.lr
    adv, ret = compute_advantages(buffer, hyper.gamma)
    adv = normalize(adv)
    history = []
    for epoch in range(hyper.epochs):
        acc = {"clip_fraction": 0.0, "approx_kl": 0.0, "entropy": 0.0, "policy_loss": 0.0, "value_loss": 0.0}
        rejected = 0
        nb = 0
        for mb in minibatches(buffer, adv, ret, hyper.segment_len, hyper.minibatch_steps, rng):
            _, st = ppo_loss(policy, mb, hyper.eps_clip, hyper.ent_coef, hyper.vf_coef)
            adam_update(policy.store, opt, clip_norm=hyper.clip_norm)
            for k in acc:
                acc[k] += st[k]
            rejected += st["rejected"]
            nb += 1
        row = {k: v / max(nb, 1) for k, v in acc.items()}
        row.update(epoch=epoch, rejected=rejected)
        history.append(row)
    return history


def make_optimizer(hyper):
    return AdamState(lr=hyper.lr)


class ToyReach:
    """Reach a random lateral target offset: x' = x + clip(u, −1, 1)·0.5, reward −|x − target|.

    Observations are padded to ``obs_dim`` with zeros so the same policy
    class can be used.
    """

    def __init__(self, obs_dim=17, horizon=20):
        self.obs_dim, self.horizon = obs_dim, horizon

    def reset(self, rng):
        self.x = 0.0
        self.target = rng.uniform(-2.0, 2.0)
        self.t = 0
        return self._obs()

    def _obs(self):
        o = np.zeros(self.obs_dim)
        o[0] = self.x - self.target
        return o

    def step(self, action):
        self.x += 0.5 * float(np.clip(action[1], -1.0, 1.0))
        self.t += 1
        r = -abs(self.x - self.target)
        return self._obs(), r, self.t >= self.horizon


def train_toy(policy, hyper, rng, updates=50):
    """Collect-and-update loop on :class:`ToyReach`; returns mean episode reward per update."""
    env = ToyReach(policy.cfg.obs_dim)
    opt = make_optimizer(hyper)
    curve = []
    for _ in range(updates):
        buf = RolloutBuffer()
        totals = []
        while len(buf) < hyper.steps_per_update:
            obs = env.reset(rng)
            h = policy.initial_state()
            buf.begin_episode()
            total, done = 0.0, False
            while not done:
                h_prev = h
                h, a, lp, v = policy.act(h, obs, rng)
                buf.add(obs, a, lp, v, h_prev)
                obs, r, done = env.step(a)
                buf.set_reward(r)
                total += r
            # time-limit end: bootstrap from the value of the final observation
            _, _, v_last = policy.step(h, obs)
            buf.end_episode(float(v_last[0]), terminal=False)
            totals.append(total)
        update(policy, buf, hyper, opt, rng)
        curve.append(float(np.mean(totals)))
    return curve
