"""Attack reward with behavioral guidance and a per-term breakdown."""

from dataclasses import asdict, dataclass

import numpy as np

TERMS = ("deviation", "lane", "jerk", "cos_sim", "collision")


@dataclass(frozen=True)
class RewardWeights:
    deviation: float = 1.0
    lane: float = 0.25
    jerk: float = 0.25
    cos_sim: float = 5.0
    collision: float = 50.0
    baseline: float = -0.1

    def __post_init__(self):
        if not all(np.isfinite(v) for v in asdict(self).values()):
            raise ValueError("reward weights must be finite")

    def signed(self):
        """Weight applied to each raw term (penalties carry a minus sign)."""
        return {"deviation": -self.deviation, "lane": -self.lane, "jerk": -self.jerk,
                "cos_sim": self.cos_sim, "collision": self.collision}


def cos_sim(f, g):
    """Cosine similarity of two stacked sample windows; 0 for degenerate input."""
    f = np.asarray(f, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    nf, ng = np.linalg.norm(f), np.linalg.norm(g)
    if nf == 0.0 or ng == 0.0:
        return 0.0
    return float(np.clip(f @ g / (nf * ng), -1.0, 1.0))


def window_cos_sim(exec_xv, ref_xv, window=10):
    """cos_sim over the trailing ``window`` samples of executed vs reference (X, V) deltas.

    Both inputs are (n, 2) arrays aligned in time.  Fewer than 2 samples gives 0.
    """
    exec_xv = np.asarray(exec_xv, dtype=np.float64).reshape(-1, 2)
    ref_xv = np.asarray(ref_xv, dtype=np.float64).reshape(-1, 2)
    n = min(len(exec_xv), len(ref_xv))
    if n < 2:
        return 0.0
    k = min(window, n)
    f = exec_xv[n - k:n]
    g = ref_xv[n - k:n]
    # stacked as [X_1..X_k, V_1..V_k]
    return cos_sim(f.T.ravel(), g.T.ravel())


def reward(deviation, off_lane, accel_change, similarity, collided, weights=None, guidance=True):
    """Scalar reward and its breakdown.

    R = −λ1·l − λ2·lane − λ3·|Δa| + λ4·cos_sim + λ5·collision + baseline.
    Without ``guidance`` the deviation and cos_sim terms are zero (no reference
    track exists).  The breakdown holds each raw term, the baseline and the
    total; the total equals Σ signed weight × term + baseline.
    """
    w = weights or RewardWeights()
    raw = {
        "deviation": float(deviation) if guidance else 0.0,
        "lane": 1.0 if off_lane else 0.0,
        "jerk": abs(float(accel_change)),
        "cos_sim": float(similarity) if guidance else 0.0,
        "collision": 1.0 if collided else 0.0,
    }
    signed = w.signed()
    total = w.baseline
    for k in TERMS:
        total += signed[k] * raw[k]
    out = dict(raw)
    out["baseline"] = w.baseline
    out["total"] = total
    return total, out
