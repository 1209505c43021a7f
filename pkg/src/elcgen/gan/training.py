"""MLE pretraining, Monte-Carlo rollout rewards and adversarial updates."""

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import AdamState, adam_update, load_checkpoint, save_checkpoint
from ..nn.core import log_softmax, sigmoid, softmax
from ..rng import get_state, set_state, substream
from .metrics import nll_real
from .models import Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, OracleModel

log = logging.getLogger(__name__)

PROB_CLIP = 1e-7


@dataclass
class GanConfig:
    seq_len: int = 40
    batch: int = 64
    pretrain_epochs: int = 40
    pretrain_lr: float = 1e-2
    pretrain_lr_final: float = None  # geometric decay target over the MLE epochs; None keeps lr constant
    disc_pretrain_steps: int = 30
    adv_rounds: int = 30
    adv_batch: int = 64
    rollouts: int = 16
    disc_steps: int = 3
    gen_lr: float = 1e-3
    disc_lr: float = 1e-3
    clip_norm: float = 5.0
    eval_samples: int = 1000
    eval_every: int = 1

    def to_dict(self):
        return asdict(self)


def _onehot_grad(logits, seqs):
    """softmax(logits) − onehot(seqs): gradient of −log p(seqs) w.r.t. logits."""
    p = softmax(logits, axis=-1)
    np.put_along_axis(p, seqs[..., None], np.take_along_axis(p, seqs[..., None], axis=-1) - 1.0, axis=-1)
    return p


def mle_loss_and_grad(gen, seqs):
    """Mean per-token cross-entropy on teacher-forced ``seqs``; fills gen grads."""
    seqs = np.asarray(seqs, dtype=np.int64)
    gen.store.zero_grad()
    logits, cache = gen.forward(seqs)
    lp = np.take_along_axis(log_softmax(logits), seqs[..., None], axis=-1)[..., 0]
    n = seqs.size
    gen.backward(cache, _onehot_grad(logits, seqs) / n)
    return float(-lp.sum() / n)


def pretrain_mle(gen, corpus, epochs, rng, opt=None, batch=64, clip_norm=5.0):
    """Teacher-forced maximum-likelihood training; returns the per-epoch mean loss."""
    corpus = np.asarray(corpus, dtype=np.int64)
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if corpus.ndim != 2:
        raise ValueError("corpus must be an (N, L) token array of equal-length sequences")
    opt = opt or AdamState(lr=1e-2)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(corpus))
        tot = 0.0
        for i in range(0, len(corpus), batch):
            idx = order[i:i + batch]
            tot += mle_loss_and_grad(gen, corpus[idx]) * len(idx)
            adam_update(gen.store, opt, clip_norm=clip_norm)
        losses.append(tot / len(corpus))
        log.debug("mle epoch %d loss %.4f", len(losses), losses[-1])
    return losses


def rollout_rewards(gen, seqs, disc, n_rollouts, rng):
    """Q(y_1:t) for every prefix of every sequence, shape (B, L).

    Prefixes shorter than L are completed ``n_rollouts`` times by sampling from
    ``gen`` and scored by the mean discriminator probability; the full
    sequence is scored by D directly.
    """
    seqs = np.asarray(seqs, dtype=np.int64)
    B, L = seqs.shape
    Q = np.empty((B, L))
    for t, state, logits in gen.prefix_states(seqs):
        st = state.repeat(n_rollouts)
        prefix = np.repeat(seqs[:, :t], n_rollouts, axis=0)
        done = gen.complete(st, np.repeat(logits, n_rollouts, axis=0), prefix, L, rng)
        Q[:, t - 1] = disc.prob(done).reshape(B, n_rollouts).mean(axis=1)
    Q[:, L - 1] = disc.prob(seqs)
    return Q


def mc_rollout_q(gen, prefix, disc, n_rollouts, rng, length, return_samples=False):
    """Monte-Carlo estimate of the expected D score of completions of one prefix."""
    prefix = np.asarray(prefix, dtype=np.int64).reshape(1, -1)
    t = prefix.shape[1]
    if t > length:
        raise ValueError("prefix longer than the sequence length")
    if t == length:
        q = float(disc.prob(prefix)[0])
        return (q, np.array([q])) if return_samples else q
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    state = gen.initial_state(1, length)
    logits = gen.step(state, np.array([gen.start_token]))
    for tok in prefix[0]:
        logits = gen.step(state, np.array([tok]))
    done = gen.complete(state.repeat(n_rollouts), np.repeat(logits, n_rollouts, axis=0),
                        np.repeat(prefix, n_rollouts, axis=0), length, rng)
    vals = disc.prob(done)
    q = float(vals.mean())
    return (q, vals) if return_samples else q


def disc_loss_and_grad(disc, real, fake):
    """Balanced binary cross-entropy (mean per sample); fills disc grads.

    Returns (loss, number of outputs that had to be clipped away from 0/1).
    """
    seqs = np.concatenate([real, fake], axis=0)
    y = np.concatenate([np.ones(len(real)), np.zeros(len(fake))])
    disc.store.zero_grad()
    z, cache = disc.forward(seqs)
    p = sigmoid(z)
    clipped = int(np.count_nonzero((p < PROB_CLIP) | (p > 1.0 - PROB_CLIP)))
    pc = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    loss = float(-np.mean(y * np.log(pc) + (1 - y) * np.log(1 - pc)))
    disc.backward(cache, (p - y) / len(y))
    return loss, clipped


def policy_gradient_step(gen, seqs, Q, opt, clip_norm=5.0):
    """REINFORCE on ``seqs`` weighted by batch-mean-baselined rewards ``Q``."""
    A = Q - Q.mean(axis=0, keepdims=True)
    gen.store.zero_grad()
    logits, cache = gen.forward(seqs)
    lp = np.take_along_axis(log_softmax(logits), seqs[..., None], axis=-1)[..., 0]
    B = len(seqs)
    loss = float(-np.sum(A * lp) / B)
    gen.backward(cache, A[..., None] * _onehot_grad(logits, seqs) / B)
    adam_update(gen.store, opt, clip_norm=clip_norm)
    return loss


def adversarial_step(gen, disc, corpus, cfg, rng, gen_opt, disc_opt):
    """One generator policy-gradient pass and ``cfg.disc_steps`` discriminator passes."""
    corpus = np.asarray(corpus, dtype=np.int64)
    L = corpus.shape[1]
    seqs = gen.sample(cfg.adv_batch, L, rng)
    Q = rollout_rewards(gen, seqs, disc, cfg.rollouts, rng)
    gen_loss = policy_gradient_step(gen, seqs, Q, gen_opt, cfg.clip_norm)
    d_losses, clipped = [], 0
    for _ in range(cfg.disc_steps):
        d, c = train_disc_batch(disc, gen, corpus, cfg.batch, rng, disc_opt, cfg.clip_norm)
        d_losses.append(d)
        clipped += c
    return {"gen_loss": gen_loss, "disc_loss": float(np.mean(d_losses)) if d_losses else float("nan"),
            "clipped": clipped, "mean_q": float(Q[:, -1].mean())}


def train_disc_batch(disc, gen, corpus, batch, rng, opt, clip_norm=5.0):
    L = corpus.shape[1]
    real = corpus[rng.integers(0, len(corpus), batch)]
    fake = gen.sample(batch, L, rng)
    loss, clipped = disc_loss_and_grad(disc, real, fake)
    adam_update(disc.store, opt, clip_norm=clip_norm)
    return loss, clipped


def fit_oracle(corpus, rng, epochs=20, hidden=32, embed=32, vocab=None):
    """Oracle fitted to a corpus by MLE, then frozen."""
    corpus = np.asarray(corpus, dtype=np.int64)
    vocab = vocab or int(corpus.max()) + 1
    gen = Generator(GeneratorConfig(vocab=vocab, embed=embed, hidden=hidden, attention=False), rng)
    pretrain_mle(gen, corpus, epochs, rng, AdamState(lr=1e-2))
    return OracleModel(gen)


@dataclass
class GanRun:
    """A generator/discriminator pair with optimizers, RNG and a JSONL-style log."""

    gen: Generator
    disc: Discriminator
    cfg: GanConfig
    seed: int
    gen_opt: AdamState = None
    disc_opt: AdamState = None
    pre_opt: AdamState = None
    rows: list = field(default_factory=list)
    position: int = 0
    timings: list = field(default_factory=list)

    def __post_init__(self):
        self.rng = substream(self.seed, "gan", "train")
        self.gen_opt = self.gen_opt or AdamState(lr=self.cfg.gen_lr)
        self.disc_opt = self.disc_opt or AdamState(lr=self.cfg.disc_lr)
        self.pre_opt = self.pre_opt or AdamState(lr=self.cfg.pretrain_lr)

    @classmethod
    def create(cls, gen_cfg, disc_cfg, cfg, seed):
        init = substream(seed, "gan", "init")
        return cls(Generator(gen_cfg, init), Discriminator(disc_cfg, init), cfg, seed)

    def schedule(self):
        c = self.cfg
        return ([("mle", i) for i in range(c.pretrain_epochs)]
                + [("disc", i) for i in range(c.disc_pretrain_steps)]
                + [("adv", i) for i in range(c.adv_rounds)])

    def mle_lr(self, epoch):
        c = self.cfg
        if c.pretrain_lr_final is None or c.pretrain_epochs <= 1:
            return c.pretrain_lr
        frac = epoch / (c.pretrain_epochs - 1)
        return c.pretrain_lr * (c.pretrain_lr_final / c.pretrain_lr) ** frac

    def _eval(self, oracle, index):
        if oracle is None or self.cfg.eval_samples <= 0:
            return None
        if index % max(1, self.cfg.eval_every) and index != len(self.schedule()) - 1:
            return None
        rng = substream(self.seed, "gan", "eval", index)
        samples = self.gen.sample(self.cfg.eval_samples, self.cfg.seq_len, rng)
        return nll_real(oracle, samples)

    def run_task(self, corpus, task, oracle=None):
        phase, i = task
        c = self.cfg
        row = {"round": self.position, "phase": phase, "gen_loss": None, "disc_loss": None}
        if phase == "mle":
            self.pre_opt.lr = self.mle_lr(i)
            row["gen_loss"] = pretrain_mle(self.gen, corpus, 1, self.rng, self.pre_opt, c.batch, c.clip_norm)[0]
        elif phase == "disc":
            row["disc_loss"] = train_disc_batch(self.disc, self.gen, corpus, c.batch, self.rng,
                                                self.disc_opt, c.clip_norm)[0]
        else:
            out = adversarial_step(self.gen, self.disc, corpus, c, self.rng, self.gen_opt, self.disc_opt)
            row["gen_loss"], row["disc_loss"] = out["gen_loss"], out["disc_loss"]
        row["nll_real"] = self._eval(oracle, self.position)
        return row

    def run(self, corpus, oracle=None, stop_after=None, checkpoint_dir=None, checkpoint_every=5,
            log_path=None):
        """Run the remaining schedule; ``stop_after`` simulates an interruption."""
        corpus = np.asarray(corpus, dtype=np.int64)
        tasks = self.schedule()
        done_now = 0
        while self.position < len(tasks):
            if stop_after is not None and done_now >= stop_after:
                break
            t0 = time.perf_counter()
            row = self.run_task(corpus, tasks[self.position], oracle)
            self.timings.append(time.perf_counter() - t0)
            self.rows.append(row)
            self.position += 1
            done_now += 1
            if log_path is not None:
                with open(log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row) + "\n")
            if checkpoint_dir is not None and (self.position % checkpoint_every == 0
                                               or self.position == len(tasks)):
                self.save(checkpoint_dir)
        return self.rows

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(os.path.join(directory, "generator.json"), self.gen.store,
                        extra={"config": self.gen.cfg.to_dict()})
        save_checkpoint(os.path.join(directory, "discriminator.json"), self.disc.store,
                        extra={"config": self.disc.cfg.to_dict()})
        state = {
            "seed": self.seed, "position": self.position, "rows": self.rows,
            "cfg": self.cfg.to_dict(), "rng": get_state(self.rng),
            "gen_opt": self.gen_opt.to_dict(), "disc_opt": self.disc_opt.to_dict(),
            "pre_opt": self.pre_opt.to_dict(),
        }
        tmp = os.path.join(directory, "trainer_state.json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh)
        os.replace(tmp, os.path.join(directory, "trainer_state.json"))

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "trainer_state.json"), encoding="utf-8") as fh:
            st = json.load(fh)
        gen, gcfg = load_generator(os.path.join(directory, "generator.json"))
        with open(os.path.join(directory, "discriminator.json"), encoding="utf-8") as fh:
            dcfg = DiscriminatorConfig(**json.load(fh)["extra"]["config"])
        disc = Discriminator(dcfg, np.random.default_rng(0))
        load_checkpoint(os.path.join(directory, "discriminator.json"), disc.store)
        run = cls(gen, disc, GanConfig(**st["cfg"]), st["seed"],
                  AdamState.from_dict(st["gen_opt"], gen.store),
                  AdamState.from_dict(st["disc_opt"], disc.store),
                  AdamState.from_dict(st["pre_opt"], gen.store),
                  rows=st["rows"], position=st["position"])
        set_state(run.rng, st["rng"])
        return run


def load_generator(path):
    with open(path, encoding="utf-8") as fh:
        cfg = GeneratorConfig(**json.load(fh)["extra"]["config"])
    gen = Generator(cfg, np.random.default_rng(0))
    load_checkpoint(path, gen.store)
    return gen, cfg
