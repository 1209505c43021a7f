"""Per-channel distribution comparison between trajectory sets."""

import numpy as np
from scipy.stats import wasserstein_distance

from ..gan.metrics import divergences

CHANNELS = ("x", "v")


def channel_samples(trajs, channel):
    return np.concatenate([np.asarray(getattr(t, channel), dtype=np.float64) for t in trajs])


def distribution_compare(generated, real, bins=30):
    """Shared-bin histograms, KL, JSD and Wasserstein-1 for each of the X and V channels."""
    if not generated or not real:
        raise ValueError("both trajectory sets must be nonempty")
    out = {}
    for ch in CHANNELS:
        g = channel_samples(generated, ch)
        r = channel_samples(real, ch)
        lo = min(g.min(), r.min())
        hi = max(g.max(), r.max())
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        hg = np.histogram(g, edges)[0].astype(np.float64)
        hr = np.histogram(r, edges)[0].astype(np.float64)
        pg, pr = hg / hg.sum(), hr / hr.sum()
        div = divergences(pg, pr)
        out[ch] = {"edges": edges, "generated": pg, "real": pr, "kl": div["kl"], "kl_infinite": div["kl_infinite"],
                   "jsd": div["jsd"], "w1": float(wasserstein_distance(g, r))}
    return out


def self_split_distance(trajs, rng):
    """Per-channel W1 between two random halves of ``trajs``."""
    trajs = list(trajs)
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories to split")
    idx = rng.permutation(len(trajs))
    half = len(trajs) // 2
    a = [trajs[i] for i in idx[:half]]
    b = [trajs[i] for i in idx[half:]]
    return {ch: float(wasserstein_distance(channel_samples(a, ch), channel_samples(b, ch))) for ch in CHANNELS}


def kappa(trajs, rng, factor=1.5, splits=20):
    """Acceptance threshold per channel: ``factor`` × the self-split W1 averaged over ``splits`` random halvings."""
    acc = {ch: 0.0 for ch in CHANNELS}
    for _ in range(splits):
        for ch, d in self_split_distance(trajs, rng).items():
            acc[ch] += d / splits
    return {ch: factor * d for ch, d in acc.items()}


def write_histograms(result, directory, prefix="dist"):
    """CSV of the shared-bin histograms and one SVG per channel."""
    import csv
    import os
    from .plots import histograms
    os.makedirs(directory, exist_ok=True)
    for ch, r in result.items():
        with open(os.path.join(directory, f"{prefix}_{ch}.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "generated", "real"])
            for i in range(len(r["generated"])):
                w.writerow([repr(float(r["edges"][i])), repr(float(r["edges"][i + 1])),
                            repr(float(r["generated"][i])), repr(float(r["real"][i]))])
        histograms(os.path.join(directory, f"{prefix}_{ch}.svg"), r["edges"], [r["generated"], r["real"]],
                   ["generated", "corpus"], f"channel {ch.upper()}")
