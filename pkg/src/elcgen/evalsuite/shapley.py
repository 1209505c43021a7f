"""Exact Shapley attribution by enumerating every coalition."""

import math
from dataclasses import dataclass

import numpy as np

from .._accel import kernel

MAX_FEATURES = 12


@dataclass(frozen=True)
class AttributionReport:
    features: tuple
    phi: np.ndarray
    value_full: float
    value_empty: float

    @property
    def efficiency_residual(self):
        return float(math.fsum(self.phi) - (self.value_full - self.value_empty))

    def to_dict(self):
        return {"features": list(self.features), "phi": [float(p) for p in self.phi],
                "value_full": self.value_full, "value_empty": self.value_empty,
                "efficiency_residual": self.efficiency_residual}


def coalition_weights(n):
    """w[s] = s!·(n − s − 1)!/n! for coalition sizes s = 0..n−1."""
    return np.array([math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)])


@kernel
def shapley_kernel(values, n, weights):
    """φ_j = Σ_{S ∌ j} w(|S|)·(v(S ∪ {j}) − v(S)) with coalitions encoded as bit masks."""
    phi = np.zeros(n)
    full = 1 << n
    for j in range(n):
        bit = 1 << j
        acc = 0.0
        for S in range(full):
            if S & bit:
                continue
            size = 0
            m = S
            while m:
                m &= m - 1
                size += 1
            acc += weights[size] * (values[S | bit] - values[S])
        phi[j] = acc
    return phi


def value_table(value_fn, n):
    """Evaluate ``value_fn`` on every coalition (a frozenset of feature indices), indexed by bit mask."""
    table = np.empty(1 << n)
    for mask in range(1 << n):
        table[mask] = value_fn(frozenset(j for j in range(n) if mask >> j & 1))
    return table


def shapley_from_table(table, features=None):
    table = np.asarray(table, dtype=np.float64)
    n = int(round(math.log2(len(table)))) if len(table) else 0
    if len(table) != 1 << n:
        raise ValueError("value table length must be a power of two")
    if n > MAX_FEATURES:
        raise ValueError(f"exact enumeration supports at most {MAX_FEATURES} features, got {n}")
    features = tuple(features) if features is not None else tuple(range(n))
    if n == 0:
        return AttributionReport(features, np.zeros(0), float(table[0]), float(table[0]))
    phi = shapley_kernel(table, n, coalition_weights(n))
    return AttributionReport(features, phi, float(table[-1]), float(table[0]))


def shapley(value_fn, features):
    """Exact Shapley values of ``value_fn`` over ``features`` (at most 12)."""
    features = tuple(features)
    if len(features) > MAX_FEATURES:
        raise ValueError(f"exact enumeration supports at most {MAX_FEATURES} features, got {len(features)}")
    return shapley_from_table(value_table(value_fn, len(features)), features)


def reward_value_fn(logs, weights=None):
    """f(S) = mean episode reward with the reward terms outside S zeroed (the baseline always counts)."""
    from ..vaa.reward import TERMS, RewardWeights
    signed = (weights or RewardWeights()).signed()
    per_episode = []
    for lg in logs:
        rows = lg.reward_terms()
        sums = {k: math.fsum(r[k] for r in rows) for k in TERMS}
        base = math.fsum(r["baseline"] for r in rows)
        per_episode.append((sums, base))
    n = max(len(per_episode), 1)

    def f(S):
        total = math.fsum(base + math.fsum(signed[TERMS[j]] * sums[TERMS[j]] for j in sorted(S))
                          for sums, base in per_episode)
        return total / n

    return f, TERMS


def reward_attribution(logs, weights=None):
    f, terms = reward_value_fn(logs, weights)
    return shapley(f, terms)
