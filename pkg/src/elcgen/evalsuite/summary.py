"""Run-level statistics computed purely from episode logs."""

import math
from dataclasses import asdict, dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class RunSummary:
    episodes: int
    collisions: int
    collision_rate: float
    ci_low: float
    ci_high: float
    trigger_rate: float
    ttc_min_mean: float
    ttc_min_p10: float
    ttc_min_p50: float
    ttc_min_p90: float
    mean_reward: float
    wallclock_s: float = None

    def to_dict(self):
        return asdict(self)


def rate_interval(k, n, z=Z95):
    """Normal-approximation interval for a proportion, clipped to [0, 1]."""
    p = k / n
    half = z * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def collision_rate(logs, wallclock_s=None):
    """Summarize a nonempty list of episode logs.

    Sums use ``math.fsum`` and percentiles sort their input, so the result
    does not depend on episode order.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("collision_rate needs at least one episode log")
    n = len(logs)
    k = sum(1 for lg in logs if lg.terminal == "collision")
    lo, hi = rate_interval(k, n)
    triggered = sum(1 for lg in logs if lg.trigger_step is not None)
    minima = []
    for lg in logs:
        t = lg.ego_ttc()
        t = t[np.isfinite(t)] if len(t) else t
        if len(t):
            minima.append(float(t.min()))
    minima.sort()
    if minima:
        arr = np.array(minima)
        stats = (math.fsum(minima) / len(minima), *(float(np.percentile(arr, q)) for q in (10, 50, 90)))
    else:
        stats = (None, None, None, None)
    totals = [math.fsum(r["total"] for r in lg.reward_terms()) for lg in logs]
    return RunSummary(
        episodes=n, collisions=k, collision_rate=k / n, ci_low=lo, ci_high=hi, trigger_rate=triggered / n,
        ttc_min_mean=_finite_or_none(stats[0]), ttc_min_p10=_finite_or_none(stats[1]),
        ttc_min_p50=_finite_or_none(stats[2]), ttc_min_p90=_finite_or_none(stats[3]),
        mean_reward=math.fsum(sorted(totals)) / n, wallclock_s=wallclock_s,
    )
