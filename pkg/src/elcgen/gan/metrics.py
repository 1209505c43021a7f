"""Sequence-level evaluation: oracle negative log-likelihood, KL/JS divergence, sampling."""

import math

import numpy as np

from ..trajdata import dequantize

LOG_FLOOR = math.log(1e-12)


def nll_real(oracle, samples):
    """Mean over sequences of −Σ_t log G_real(y_t | y_<t) (natural log)."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or len(samples) == 0:
        raise ValueError("samples must be a non-empty (N, L) token array")
    lp = np.maximum(oracle.log_probs(samples), LOG_FLOOR)
    return float(-lp.sum(axis=1).mean())


def kl_divergence(p, q):
    """Σ p_i log(p_i / q_i) with 0·log 0 = 0; +inf when q_i = 0 < p_i."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("p and q must share a support")
    m = p > 0
    if np.any(q[m] == 0):
        return math.inf
    return float(np.sum(p[m] * np.log(p[m] / q[m])))


def js_divergence(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mid = 0.5 * (p + q)
    return 0.5 * kl_divergence(p, mid) + 0.5 * kl_divergence(q, mid)


def divergences(p, q, atol=1e-9):
    """KL(p‖q) and JSD(p‖q) for two histograms over the same support."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    for name, h in (("p", p), ("q", q)):
        if np.any(h < 0) or abs(h.sum() - 1.0) > atol:
            raise ValueError(f"{name} is not a probability vector")
    kl = kl_divergence(p, q)
    return {"kl": kl, "kl_infinite": math.isinf(kl), "jsd": js_divergence(p, q)}


def generate(gen, n, length, rng, grid=None, dt=1.0, greedy=False):
    """Sample ``n`` token sequences; with a grid, return dequantized trajectories."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tokens = gen.sample(n, length, rng, greedy=greedy)
    if grid is None:
        return tokens
    return [dequantize(t, grid, dt=dt, source_id=f"gen{k:05d}") for k, t in enumerate(tokens)]
