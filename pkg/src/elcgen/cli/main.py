"""``elcgen`` command-line entry point."""

import argparse
import dataclasses
import json
import logging
import math
import os
import shutil
import sys
import time

import numpy as np
from pydantic import ValidationError

from .config import Manifest, PipelineConfig, json_schema, load_manifest, set_dotted

log = logging.getLogger("elcgen")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3

GAN_ABLATION_KEYS = {"disc": ("gru", "conv"), "attention": ("on", "off"), "core": ("gru", "lstm")}


class ConfigError(Exception):
    pass


class CheckFailed(Exception):
    pass


# ---------------------------------------------------------------- config

def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(args):
    """Read, override and validate the config; no side effects."""
    data = {}
    base = os.getcwd()
    if args.config:
        if not os.path.isfile(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        base = os.path.dirname(os.path.abspath(args.config))
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    for item in getattr(args, "ablation", None) or []:
        if "=" not in item:
            raise ConfigError(f"--ablation expects KEY=VAL, got {item!r}")
        key, val = item.split("=", 1)
        if key in GAN_ABLATION_KEYS:
            if val not in GAN_ABLATION_KEYS[key]:
                raise ConfigError(f"--ablation {key} must be one of {GAN_ABLATION_KEYS[key]}")
            set_dotted(data, f"gan.{key}", (val == "on") if key == "attention" else val)
        elif "." in key:
            set_dotted(data, key, _parse_value(val))
        else:
            raise ConfigError(f"unknown ablation key {key!r}")
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        cfg = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"  {'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n" + "\n".join(lines)) from exc
    paths = cfg.paths.model_dump()
    for k, p in paths.items():
        paths[k] = p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))
    cfg = cfg.model_copy(update={"paths": cfg.paths.model_copy(update=paths)})
    return cfg


def _require(path, what):
    if not os.path.exists(path):
        raise ConfigError(f"missing {what}: {path}")


def _write_config(directory, cfg):
    with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.model_dump(), fh, indent=1, sort_keys=True)


def _fresh_dir(path):
    if os.path.isdir(path):
        shutil.rmtree(path)
    os.makedirs(path)


def _grid(cfg):
    from ..trajdata import QuantizerGrid
    q = cfg.quantizer
    return QuantizerGrid(q.x_min, q.x_max, q.v_min, q.v_max, q.x_bins, q.v_bins)


def _write_timings(directory, timings):
    with open(os.path.join(directory, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------- commands

def cmd_synth(cfg, args):
    from ..rng import substream
    from ..trajdata import synth_corpus, write_trajectories
    out = args.out or cfg.paths.corpus
    n = cfg.synth.n
    if n == 0:
        log.warning("synth: n = 0, writing a header-only corpus")
    trajs = synth_corpus(n, substream(cfg.seed, "synth"), cfg.synth.dt_s, cfg.synth.noise_scale)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    write_trajectories(out, trajs)
    with open(out + ".provenance.json", "w", encoding="utf-8") as fh:
        json.dump({"generator": "synthetic quintic lane change", "n": n, "seed": cfg.seed,
                   "dt_s": cfg.synth.dt_s, "noise_scale": cfg.synth.noise_scale,
                   "config_hash": cfg.config_hash()}, fh, indent=1, sort_keys=True)
    print(f"wrote {n} trajectories to {out}")


def _load_corpus_tokens(cfg):
    from ..trajdata import filter_emergency, load_trajectories, normalize, resample, tokenize_corpus
    trajs = filter_emergency(load_trajectories(cfg.paths.corpus), cfg.quantizer.max_duration_s)
    if not trajs:
        raise ConfigError(f"corpus {cfg.paths.corpus} has no emergency lane changes")
    tokens = tokenize_corpus(trajs, _grid(cfg), cfg.quantizer.length, mirror=True)
    dt_ref = float(np.mean([resample(normalize(t), cfg.quantizer.length).dt for t in trajs]))
    return trajs, tokens, dt_ref


def cmd_train_gan(cfg, args):
    from ..gan import GanConfig, GanRun, OracleModel, fit_oracle, variant_configs
    from ..gan.models import Generator, GeneratorConfig
    from ..nn import load_checkpoint, save_checkpoint
    from ..rng import substream
    _require(cfg.paths.corpus, "corpus")
    out = args.out or cfg.paths.gan_dir
    _, tokens, dt_ref = _load_corpus_tokens(cfg)
    g = cfg.gan
    grid = _grid(cfg)
    flags = {"disc": g.disc, "attention": g.attention, "core": g.core}
    overrides = {k: v for k, v in flags.items() if v is not None}
    gen_cfg, disc_cfg = variant_configs(grid.vocab_size, g.variant, g.embed, g.hidden, **overrides)
    gcfg = GanConfig(seq_len=cfg.quantizer.length, batch=g.batch, pretrain_epochs=g.pretrain_epochs,
                     pretrain_lr=g.pretrain_lr, pretrain_lr_final=g.pretrain_lr_final,
                     disc_pretrain_steps=g.disc_pretrain_steps, adv_rounds=g.adv_rounds,
                     adv_batch=g.adv_batch, rollouts=g.rollouts, disc_steps=g.disc_steps, gen_lr=g.gen_lr,
                     disc_lr=g.disc_lr, eval_samples=g.eval_samples, eval_every=g.eval_every)
    log_path = os.path.join(out, "train_log.jsonl")
    resume = args.resume and os.path.isfile(os.path.join(out, "trainer_state.json"))
    if resume:
        _check_resume(out, cfg)
        run = GanRun.load(out)
        _truncate_jsonl(log_path, run.position)
    else:
        _fresh_dir(out)
        _write_config(out, cfg)
        run = GanRun.create(gen_cfg, disc_cfg, gcfg, cfg.seed)
        run.save(out)
    oracle_path = os.path.join(out, "oracle.json")
    if os.path.isfile(oracle_path):
        og = Generator(GeneratorConfig(vocab=grid.vocab_size, embed=g.embed, hidden=g.hidden, attention=False),
                       np.random.default_rng(0))
        load_checkpoint(oracle_path, og.store)
        oracle = OracleModel(og)
    elif g.oracle_epochs > 0 and g.eval_samples > 0:
        oracle = fit_oracle(tokens, substream(cfg.seed, "gan", "oracle"), epochs=g.oracle_epochs, hidden=g.hidden,
                            embed=g.embed, vocab=grid.vocab_size)
        save_checkpoint(oracle_path, oracle.gen.store)
    else:
        oracle = None
    with open(os.path.join(out, "blm.json"), "w", encoding="utf-8") as fh:
        json.dump({"grid": dataclasses.asdict(grid), "length": cfg.quantizer.length, "dt": dt_ref,
                   "mirror": True}, fh, indent=1,
                  sort_keys=True)
    run.run(tokens, oracle, stop_after=args.stop_after, checkpoint_dir=out, checkpoint_every=g.checkpoint_every,
            log_path=log_path)
    run.save(out)
    _write_timings(out, {"task_seconds": run.timings})
    Manifest(out, "train-gan", cfg).finish({"position": run.position, "tasks": len(run.schedule())})
    print(f"gan: {run.position}/{len(run.schedule())} tasks done, checkpoints in {out}")


def _check_resume(out, cfg):
    path = os.path.join(out, "config.json")
    if not os.path.isfile(path):
        raise ConfigError(f"cannot resume: {path} is missing")
    with open(path, encoding="utf-8") as fh:
        stored = PipelineConfig.model_validate(json.load(fh))
    if stored.config_hash() != cfg.config_hash():
        raise ConfigError("cannot resume: config differs from the checkpointed run")


def _truncate_jsonl(path, n):
    """Keep the first ``n`` rows (rows past the last checkpoint are regenerated on resume)."""
    if not os.path.isfile(path):
        return
    with open(path, encoding="utf-8") as fh:
        rows = fh.readlines()[:n]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(rows)


def _load_source(gan_dir):
    from ..gan import load_generator
    from ..trajdata import QuantizerGrid
    from ..vaa import GeneratorSource
    _require(os.path.join(gan_dir, "generator.json"), "generator checkpoint")
    _require(os.path.join(gan_dir, "blm.json"), "generator metadata")
    gen, _ = load_generator(os.path.join(gan_dir, "generator.json"))
    with open(os.path.join(gan_dir, "blm.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    grid = QuantizerGrid(**meta["grid"])
    if gen.cfg.vocab != grid.vocab_size:
        raise ConfigError("generator vocabulary does not match its quantizer grid")
    return GeneratorSource(gen, grid, meta["dt"], meta["length"])


def _train_config(cfg, guidance):
    from ..vaa import PolicyConfig, PpoHyper, RewardWeights, TrainConfig
    p = cfg.policy
    if len(p.weights) != 5:
        raise ConfigError("policy.weights needs 5 entries")
    hyper = PpoHyper(lr=p.lr, steps_per_update=p.steps_per_update, minibatch_steps=p.minibatch_steps,
                     epochs=p.epochs, ent_coef=p.ent_coef, gamma=p.gamma, eps_clip=p.eps_clip,
                     segment_len=p.segment_len)
    return TrainConfig(updates=p.updates, hyper=hyper, policy=PolicyConfig(hidden=p.hidden),
                       weights=RewardWeights(*p.weights, baseline=p.baseline), guidance=guidance, window=p.window)


def cmd_train_policy(cfg, args):
    from ..vaa import PolicyTrainer
    source = _load_source(cfg.paths.gan_dir)
    out = args.out or cfg.paths.policy_dir
    tcfg = _train_config(cfg, not args.no_blm)
    trainer = PolicyTrainer(tcfg, source, cfg.seed, cfg.controller)
    log_path = os.path.join(out, "train_log.jsonl")
    if args.resume and os.path.isfile(os.path.join(out, "trainer_state.json")):
        _check_resume(out, cfg)
        trainer.load(out)
        _truncate_jsonl(log_path, len(trainer.rows))
    else:
        _fresh_dir(out)
        _write_config(out, cfg)
    timings = trainer.train(stop_after_total(trainer, tcfg.updates, args.stop_after), log_path, out,
                            cfg.policy.checkpoint_every)
    trainer.save(out)
    _write_timings(out, {"update_seconds": timings})
    Manifest(out, "train-policy", cfg).finish({"updates": len(trainer.rows), "guidance": tcfg.guidance})
    print(f"policy: {len(trainer.rows)} updates, checkpoints in {out}")


def stop_after_total(trainer, updates, stop_after):
    if stop_after is None:
        return updates
    return min(updates, len(trainer.rows) + stop_after)


def _scenarios(cfg, n):
    from ..env.scenarios import standard_scenarios
    s = cfg.scenario
    scs = standard_scenarios(n, cfg.seed, lanes=s.lanes, lane_width=s.lane_width_m, dt=s.dt_s)
    return [sc.model_copy(update={"trigger_ttc_s": s.trigger_ttc_s, "max_duration_s": s.max_duration_s})
            for sc in scs]


def _write_run(out, logs, cfg, command, extra, wall):
    from ..env import load_episode
    from ..evalsuite import collision_rate
    ep_dir = os.path.join(out, "episodes")
    for i, lg in enumerate(logs):
        lg.write(os.path.join(ep_dir, f"ep_{i:04d}"))
    reloaded = [load_episode(os.path.join(ep_dir, f"ep_{i:04d}")) for i in range(len(logs))]
    summary = collision_rate(reloaded).to_dict()
    summary.pop("wallclock_s")
    summary.update(extra)
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    _write_timings(out, {"wallclock_s": wall, "episodes": len(logs)})
    _write_config(out, cfg)
    Manifest(out, command, cfg).finish({"kind": extra.get("kind"), "episodes": len(logs)})
    return summary


def cmd_run(cfg, args):
    from ..vaa import evaluate, load_policy
    source = _load_source(cfg.paths.gan_dir)
    ppath = os.path.join(cfg.paths.policy_dir, "policy.json")
    _require(ppath, "policy checkpoint")
    from ..nn import CheckpointError
    try:
        policy = load_policy(ppath)
    except (CheckpointError, KeyError) as exc:
        raise ConfigError(f"policy checkpoint mismatch: {exc}") from exc
    out = args.out or cfg.paths.run_dir
    n = args.episodes or cfg.eval.episodes
    scs = _scenarios(cfg, n)
    _fresh_dir(out)
    from ..vaa import RewardWeights
    p = cfg.policy
    t0 = time.perf_counter()
    logs = evaluate(policy, source, scs, cfg.seed, guidance=not args.no_blm, use_mpc=not args.no_mpc,
                    controller_cfg=cfg.controller, weights=RewardWeights(*p.weights, baseline=p.baseline))
    wall = time.perf_counter() - t0
    summary = _write_run(out, logs, cfg, "run", {"kind": "ours", "guidance": not args.no_blm,
                                                 "mpc": not args.no_mpc}, wall)
    print(f"run: {n} episodes, collision rate {summary['collision_rate']:.3f} -> {out}")


def cmd_baseline(cfg, args):
    from ..evalsuite import run_baseline
    kind = args.kind
    b = cfg.eval.baselines
    budget = args.budget or {"grid": b.grid_lattice ** 2, "random": b.random_budget,
                             "scripted": b.scripted_budget}[kind]
    if kind == "grid" and math.isqrt(budget) ** 2 != budget:
        raise ConfigError(f"grid budget must be a perfect square, got {budget}")
    out = args.out or os.path.join(os.path.dirname(cfg.paths.run_dir), f"baseline_{kind}")
    scs = _scenarios(cfg, cfg.eval.episodes)
    _fresh_dir(out)
    summary, logs = run_baseline(kind, scs, budget, cfg.seed, cfg.controller, use_mpc=not args.no_mpc)
    summary = _write_run(out, logs, cfg, "baseline", {"kind": kind, "budget": budget}, summary.wallclock_s)
    print(f"baseline {kind}: {len(logs)} episodes, collision rate {summary['collision_rate']:.3f} -> {out}")


def cmd_eval(cfg, args):
    from .report import ReportInputError, build_report
    if not args.runs:
        raise ConfigError("eval needs at least one run directory")
    for r in args.runs:
        _require(os.path.join(r, "manifest.json"), "run manifest")
        _require(os.path.join(r, "config.json"), "run config")
    if not args.config:
        # the first run's stored config makes the report reproducible from manifests alone
        with open(os.path.join(args.runs[0], "config.json"), encoding="utf-8") as fh:
            raw = json.load(fh)
        if args.seed is not None:
            raw["seed"] = args.seed
        try:
            cfg = PipelineConfig.model_validate(raw)
        except ValidationError as exc:
            raise ConfigError(f"stored config of {args.runs[0]} is invalid: {exc}") from exc
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.runs[0])), "report")
    try:
        report = build_report(args.runs, out, cfg)
    except ReportInputError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"report written to {out}")
    if args.check:
        failed = [c for c in report["checks"] if not c["passed"]]
        for c in report["checks"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
        if failed:
            raise CheckFailed(", ".join(c["name"] for c in failed))


COMMANDS = {"synth": cmd_synth, "train-gan": cmd_train_gan, "train-policy": cmd_train_policy, "run": cmd_run,
            "eval": cmd_eval, "baseline": cmd_baseline}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON pipeline config")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="output location for this command")
    common.add_argument("--ablation", action="append", metavar="KEY=VAL",
                        help="GAN ablation flag (disc=conv|gru, attention=on|off, core=gru|lstm) "
                             "or a dotted config override such as policy.updates=3")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="elcgen", description="Emergency lane-change attack scenario pipeline")
    p.add_argument("--schema", action="store_true", help="print the config JSON schema and exit")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("synth", parents=[common], help="write a synthetic lane-change corpus")
    s = sub.add_parser("train-gan", parents=[common], help="train the behavior generator")
    s.add_argument("--resume", action="store_true")
    s.add_argument("--stop-after", type=int, help="stop after this many tasks (for testing resumption)")
    s = sub.add_parser("train-policy", parents=[common], help="train the attack policy")
    s.add_argument("--resume", action="store_true")
    s.add_argument("--stop-after", type=int)
    s.add_argument("--no-blm", action="store_true", help="train without behavioral guidance")
    s = sub.add_parser("run", parents=[common], help="run evaluation episodes with the trained policy")
    s.add_argument("--episodes", type=int)
    s.add_argument("--no-blm", action="store_true", help="disable the reference track and cos_sim term")
    s.add_argument("--no-mpc", action="store_true", help="chase raw waypoints without the controller")
    s = sub.add_parser("eval", parents=[common], help="build a comparison report from run directories")
    s.add_argument("runs", nargs="*")
    s.add_argument("--check", action="store_true", help="exit 3 when a report check fails")
    s = sub.add_parser("baseline", parents=[common], help="run a grid/random/scripted baseline")
    s.add_argument("--kind", choices=("grid", "random", "scripted"), required=True)
    s.add_argument("--budget", type=int)
    s.add_argument("--no-mpc", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.schema:
        print(json.dumps(json_schema(), indent=1, sort_keys=True))
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
