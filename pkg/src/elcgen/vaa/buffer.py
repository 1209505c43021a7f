"""Rollout storage, one-step TD advantages and segment minibatches."""

from dataclasses import dataclass, field

import numpy as np

from .policy import Minibatch


class BufferUnderfullError(ValueError):
    pass


@dataclass
class RolloutBuffer:
    """Flat per-step storage; episodes are contiguous index ranges.

    ``hidden`` holds the GRU state *before* each step so any segment can be
    replayed from its first step.  ``next_value`` is the bootstrap for the last
    step of an episode: 0 when the episode ended in a terminal state, else the
    value estimate of the final observation (time-limit truncation).
    """
    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logp: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    hidden: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    bootstrap: list = field(default_factory=list)
    _start: int = None

    def __len__(self):
        return len(self.rewards)

    def begin_episode(self):
        if self._start is not None:
            raise RuntimeError("previous episode not finished")
        self._start = len(self.obs)

    def add(self, obs, action, logp, value, hidden):
        if self._start is None:
            raise RuntimeError("add() outside an episode")
        if len(self.rewards) != len(self.obs):
            raise RuntimeError("reward for the previous step is missing")
        self.obs.append(np.asarray(obs, dtype=np.float64).copy())
        self.actions.append(np.asarray(action, dtype=np.float64).copy())
        self.logp.append(float(logp))
        self.values.append(float(value))
        self.hidden.append(np.asarray(hidden, dtype=np.float64).reshape(-1).copy())
        self.dones.append(False)

    def set_reward(self, r):
        if len(self.rewards) != len(self.obs) - 1:
            raise RuntimeError("set_reward() must follow add()")
        self.rewards.append(float(r))

    def end_episode(self, last_value=0.0, terminal=True):
        start, self._start = self._start, None
        end = len(self.obs)
        if end > len(self.rewards):
            # action taken but the episode stopped before its reward arrived
            for lst in (self.obs, self.actions, self.logp, self.values, self.hidden, self.dones):
                del lst[len(self.rewards):]
            end = len(self.obs)
        if end == start:
            return
        self.dones[end - 1] = bool(terminal)
        self.episodes.append((start, end))
        self.bootstrap.append(0.0 if terminal else float(last_value))

    def as_arrays(self):
        return {
            "obs": np.array(self.obs), "actions": np.array(self.actions), "logp": np.array(self.logp),
            "rewards": np.array(self.rewards), "values": np.array(self.values), "dones": np.array(self.dones),
            "hidden": np.array(self.hidden),
        }

    def segments(self, length):
        """(start, end) ranges of at most ``length`` steps, never crossing an episode boundary."""
        out = []
        for s, e in self.episodes:
            for a in range(s, e, length):
                out.append((a, min(a + length, e)))
        return out


def compute_advantages(buffer, gamma=0.99):
    """A_t = r_t + γ·V(s_{t+1}) − V(s_t); returns = A + V.  Not normalized."""
    r = np.array(buffer.rewards)
    v = np.array(buffer.values)
    nxt = np.zeros_like(v)
    for (s, e), boot in zip(buffer.episodes, buffer.bootstrap):
        nxt[s:e - 1] = v[s + 1:e]
        nxt[e - 1] = boot
    adv = r + gamma * nxt - v
    return adv, adv + v


def normalize(adv):
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-12 else 1.0)


def minibatches(buffer, adv, returns, segment_len, steps_per_batch, rng):
    """Shuffle segments and pack them into padded minibatches of about ``steps_per_batch`` steps."""
    arr = buffer.as_arrays()
    segs = buffer.segments(segment_len)
    order = rng.permutation(len(segs))
    per = max(1, steps_per_batch // segment_len)
    for i in range(0, len(order), per):
        chosen = [segs[j] for j in order[i:i + per]]
        yield pack_segments(arr, chosen, adv, returns, segment_len)


def pack_segments(arr, segs, adv, returns, segment_len):
    B, T = len(segs), segment_len
    D = arr["obs"].shape[1]
    obs = np.zeros((B, T, D))
    act = np.zeros((B, T, 2))
    old = np.zeros((B, T))
    A = np.zeros((B, T))
    R = np.zeros((B, T))
    mask = np.zeros((B, T))
    h0 = np.zeros((B, arr["hidden"].shape[1]))
    for b, (s, e) in enumerate(segs):
        n = e - s
        obs[b, :n] = arr["obs"][s:e]
        act[b, :n] = arr["actions"][s:e]
        old[b, :n] = arr["logp"][s:e]
        A[b, :n] = adv[s:e]
        R[b, :n] = returns[s:e]
        mask[b, :n] = 1.0
        h0[b] = arr["hidden"][s]
    return Minibatch(obs, act, old, A, R, mask, h0)
