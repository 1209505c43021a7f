"""Comparison report built purely from persisted run directories."""

import csv
import json
import math
import os

import numpy as np

from ..env import load_episode
from ..evalsuite import GridSpec, collision_rate, distribution_compare, kappa, reward_attribution, ttc_field
from ..evalsuite.distribution import write_histograms
from ..evalsuite.plots import bars, curves
from ..rng import substream
from .config import SCHEMA_VERSION, Manifest, PipelineConfig


class ReportInputError(ValueError):
    pass


def _num(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_run(directory):
    """Manifest, stored config and reloaded episode logs of one run directory."""
    manifest = _read_json(os.path.join(directory, "manifest.json"))
    raw = _read_json(os.path.join(directory, "config.json"))
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ReportInputError(f"{directory}: schema version {raw.get('schema_version')!r} "
                               f"is not {SCHEMA_VERSION}")
    cfg = PipelineConfig.model_validate(raw)
    ep_root = os.path.join(directory, "episodes")
    names = sorted(os.listdir(ep_root)) if os.path.isdir(ep_root) else []
    logs = [load_episode(os.path.join(ep_root, n)) for n in names]
    if not logs:
        raise ReportInputError(f"{directory}: no episodes")
    timings = {}
    tpath = os.path.join(directory, "timings.json")
    if os.path.isfile(tpath):
        timings = _read_json(tpath)
    return {"dir": directory, "manifest": manifest, "config": cfg, "logs": logs, "timings": timings,
            "kind": manifest.get("kind") or "run"}


def _labels(runs):
    labels, seen = [], {}
    for r in runs:
        base = r["kind"]
        seen[base] = seen.get(base, 0) + 1
        labels.append(base if seen[base] == 1 else f"{base}_{seen[base]}")
    return labels


def _reward_curve(cfg):
    path = os.path.join(cfg.paths.policy_dir, "train_log.jsonl")
    if not os.path.isfile(path):
        return None
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return rows or None


def _generated_vs_corpus(cfg, rng_seed):
    """Generator samples against the tokenized corpus, both dequantized to bin centers."""
    from ..gan import load_generator
    from ..trajdata import QuantizerGrid, dequantize, filter_emergency, load_trajectories, tokenize_corpus
    gpath = os.path.join(cfg.paths.gan_dir, "generator.json")
    mpath = os.path.join(cfg.paths.gan_dir, "blm.json")
    if not (os.path.isfile(gpath) and os.path.isfile(mpath) and os.path.isfile(cfg.paths.corpus)):
        return None
    meta = _read_json(mpath)
    grid = QuantizerGrid(**meta["grid"])
    gen, _ = load_generator(gpath)
    trajs = filter_emergency(load_trajectories(cfg.paths.corpus), cfg.quantizer.max_duration_s)
    if len(trajs) < 2:
        return None
    tokens = tokenize_corpus(trajs, grid, meta["length"], mirror=meta.get("mirror", True))
    real = [dequantize(t, grid) for t in tokens]
    samples = gen.sample(cfg.eval.generated_samples, meta["length"], substream(rng_seed, "report", "generate"))
    generated = [dequantize(s, grid) for s in samples]
    return distribution_compare(generated, real, cfg.eval.bins), kappa(real, substream(rng_seed, "report", "kappa"))


def build_report(run_dirs, out, cfg):
    """Write the merged report under ``out``; returns the report document."""
    runs = [load_run(d) for d in run_dirs]
    labels = _labels(runs)
    os.makedirs(out, exist_ok=True)
    spec = GridSpec(dx=cfg.eval.grid_dx, dy=cfg.eval.grid_dy)
    doc = {"runs": [], "checks": []}
    summaries = []
    for lab, r in zip(labels, runs):
        s = collision_rate(r["logs"]).to_dict()
        s.pop("wallclock_s")
        summaries.append(s)
        sub = os.path.join(out, lab)
        os.makedirs(sub, exist_ok=True)
        field = ttc_field(r["logs"], spec)
        field.write_csv(os.path.join(sub, "ttc_field.csv"))
        field.write_svg(os.path.join(sub, "ttc_field.svg"), f"min TTC over ego position ({lab})")
        entry = {"label": lab, "kind": r["kind"], "dir": os.path.basename(os.path.normpath(r["dir"])),
                 "summary": s}
        if any(lg.reward_terms() for lg in r["logs"]):
            rep = reward_attribution(r["logs"])
            entry["shapley"] = rep.to_dict()
            with open(os.path.join(sub, "shapley.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["term", "phi"])
                for f, p in zip(rep.features, rep.phi):
                    w.writerow([f, _num(p)])
        doc["runs"].append(entry)

    cols = ["episodes", "collisions", "collision_rate", "ci_low", "ci_high", "trigger_rate", "ttc_min_mean",
            "ttc_min_p10", "ttc_min_p50", "ttc_min_p90", "mean_reward"]
    with open(os.path.join(out, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "kind", *cols])
        for lab, r, s in zip(labels, runs, summaries):
            w.writerow([lab, r["kind"], *(_num(s[c]) if isinstance(s[c], float) else s[c] for c in cols)])

    if len(runs) > 1:
        rates = [s["collision_rate"] for s in summaries]
        errs = [(s["collision_rate"] - s["ci_low"], s["ci_high"] - s["collision_rate"]) for s in summaries]
        bars(os.path.join(out, "collision_rates.svg"), labels, rates, errs, "collision rate",
             "collision rate by method")
        walls = [float(r["timings"].get("wallclock_s", float("nan"))) for r in runs]
        bars(os.path.join(out, "wallclock.svg"), labels, walls, None, "seconds", "evaluation wallclock")
        with open(os.path.join(out, "timings.json"), "w", encoding="utf-8") as fh:
            json.dump({"wallclock_s": dict(zip(labels, walls))}, fh, indent=1, sort_keys=True)
        ours = [i for i, r in enumerate(runs) if r["kind"] == "ours"]
        for i in ours:
            for j, r in enumerate(runs):
                if r["kind"] in ("random", "grid", "scripted"):
                    a, b = summaries[i]["collision_rate"], summaries[j]["collision_rate"]
                    doc["checks"].append({"name": f"{labels[i]}_beats_{labels[j]}", "passed": a > b,
                                          "detail": f"{a:.3f} vs {b:.3f}"})

    curve = _reward_curve(cfg)
    if curve:
        with open(os.path.join(out, "reward_curve.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["update", "mean_reward", "collision_rate"])
            for row in curve:
                w.writerow([row["update"], _num(row["mean_reward"]), _num(row["collision_rate"])])
        x = np.array([row["update"] for row in curve])
        curves(os.path.join(out, "reward_curve.svg"),
               {"mean episode reward": (x, np.array([row["mean_reward"] for row in curve]))},
               "update", "reward", "training reward")

    dist = _generated_vs_corpus(cfg, cfg.seed)
    if dist is not None:
        result, kap = dist
        write_histograms(result, out)
        doc["distribution"] = {ch: {"w1": r["w1"], "jsd": r["jsd"], "kl": r["kl"], "kappa": kap[ch]}
                               for ch, r in result.items()}
        for ch, r in result.items():
            doc["checks"].append({"name": f"w1_{ch}_within_kappa", "passed": r["w1"] <= kap[ch],
                                  "detail": f"W1 {r['w1']:.4f} vs kappa {kap[ch]:.4f}"})

    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    Manifest(out, "eval", cfg).finish({"runs": labels})
    return doc
