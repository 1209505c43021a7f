"""Generator, discriminator and frozen oracle networks for the sequence GAN."""

from dataclasses import asdict, dataclass

import numpy as np

from ..nn import Attention, Conv1dMaxPool, Embedding, GRUCell, Linear, LSTMCell, ParamStore
from ..nn.core import log_softmax, sigmoid, softmax


@dataclass
class GeneratorConfig:
    vocab: int
    embed: int = 32
    hidden: int = 64
    core: str = "gru"
    attention: bool = True
    attn_dim: int = 0

    def __post_init__(self):
        if self.core not in ("gru", "lstm"):
            raise ValueError(f"unknown core {self.core!r}")
        if self.attn_dim <= 0:
            self.attn_dim = self.hidden

    def to_dict(self):
        return asdict(self)


@dataclass
class DiscriminatorConfig:
    vocab: int
    embed: int = 32
    hidden: int = 64
    kind: str = "gru"
    widths: tuple = (2, 3, 4, 5)
    filters: int = 16

    def __post_init__(self):
        if self.kind not in ("gru", "conv"):
            raise ValueError(f"unknown discriminator kind {self.kind!r}")
        self.widths = tuple(self.widths)

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


class GenState:
    """Autoregressive state: recurrent h (and c), plus the prefix hidden states."""

    __slots__ = ("h", "c", "S", "P", "t")

    def __init__(self, h, c, S, P, t):
        self.h, self.c, self.S, self.P, self.t = h, c, S, P, t

    def repeat(self, n):
        """Each batch row repeated ``n`` times consecutively."""
        rep = lambda a: None if a is None else np.repeat(a, n, axis=0)
        return GenState(rep(self.h), rep(self.c), rep(self.S), rep(self.P), self.t)

    def copy(self):
        cp = lambda a: None if a is None else a.copy()
        return GenState(cp(self.h), cp(self.c), cp(self.S), cp(self.P), self.t)


def sample_categorical(probs, rng):
    """One draw per row by inverse CDF."""
    u = rng.random(probs.shape[0])
    cdf = np.cumsum(probs, axis=1)
    idx = np.sum(cdf < u[:, None] * cdf[:, -1:], axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


class Generator:
    """Token generator: embedding → recurrent core → (attention over own prefix states) → softmax head.

    Token id ``vocab`` is the start symbol; the head only covers ``vocab`` ids.
    """

    def __init__(self, cfg, rng, init_std=None):
        self.cfg = cfg
        self.store = ParamStore()
        V, E, H = cfg.vocab, cfg.embed, cfg.hidden
        self.start_token = V
        self.emb = Embedding(self.store, "gen.emb", V + 1, E, rng)
        cell_cls = GRUCell if cfg.core == "gru" else LSTMCell
        self.cell = cell_cls(self.store, f"gen.{cfg.core}", E, H, rng)
        self.att = Attention(self.store, "gen.att", H, H, cfg.attn_dim, rng) if cfg.attention else None
        self.head = Linear(self.store, "gen.head", 2 * H if cfg.attention else H, V, rng)
        if init_std is not None:
            for p in self.store.params.values():
                p[...] = rng.normal(0.0, init_std, size=p.shape)

    @property
    def vocab(self):
        return self.cfg.vocab

    def initial_state(self, batch, capacity):
        H = self.cfg.hidden
        c = np.zeros((batch, H)) if self.cfg.core == "lstm" else None
        S = np.zeros((batch, capacity, H))
        P = np.zeros((batch, capacity, self.cfg.attn_dim)) if self.att is not None else None
        return GenState(np.zeros((batch, H)), c, S, P, 0)

    def _cell_step(self, state, x):
        if self.cfg.core == "gru":
            h, cache = self.cell.step(state.h, x)
            return h, None, cache
        h, c, cache = self.cell.step(state.h, state.c, x)
        return h, c, cache

    def step(self, state, tokens):
        """Consume ``tokens`` (B,) in place and return logits for the next token."""
        x = self.emb.E[tokens]
        h, c, _ = self._cell_step(state, x)
        state.h, state.c = h, c
        t = state.t
        if t >= state.S.shape[1]:
            grow = lambda a: np.concatenate([a, np.zeros_like(a)], axis=1)
            state.S = grow(state.S)
            if state.P is not None:
                state.P = grow(state.P)
        state.S[:, t] = h
        state.t = t + 1
        if self.att is None:
            return h @ self.head.W.T + self.head.b
        state.P[:, t] = h @ self.att.W_s.T
        _, ctx, _ = self.att.step_projected(h, state.S[:, :t + 1], state.P[:, :t + 1])
        feat = np.concatenate([h, ctx], axis=-1)
        return feat @ self.head.W.T + self.head.b

    def forward(self, seqs):
        """Teacher-forced logits (B, L, V) for every position of ``seqs``."""
        seqs = np.asarray(seqs, dtype=np.int64)
        B, L = seqs.shape
        H = self.cfg.hidden
        inputs = np.concatenate([np.full((B, 1), self.start_token), seqs[:, :-1]], axis=1)
        X, emb_cache = self.emb.forward(inputs)
        state = self.initial_state(B, L)
        cell_caches, att_caches = [], []
        feats = np.empty((B, L, 2 * H if self.att is not None else H))
        for t in range(L):
            h, c, cc = self._cell_step(state, X[:, t])
            state.h, state.c = h, c
            state.S[:, t] = h
            cell_caches.append(cc)
            if self.att is not None:
                state.P[:, t] = h @ self.att.W_s.T
                _, ctx, ac = self.att.step_projected(h, state.S[:, :t + 1], state.P[:, :t + 1])
                att_caches.append(ac)
                feats[:, t, :H] = h
                feats[:, t, H:] = ctx
            else:
                feats[:, t] = h
        logits, head_cache = self.head.forward(feats)
        return logits, (emb_cache, cell_caches, att_caches, head_cache, state.S)

    def backward(self, cache, dlogits):
        emb_cache, cell_caches, att_caches, head_cache, S = cache
        B, L, _ = dlogits.shape
        H = self.cfg.hidden
        dfeat = self.head.backward(head_cache, dlogits)
        dS_acc = np.zeros((B, L, H))
        dP_acc = np.zeros((B, L, self.cfg.attn_dim)) if self.att is not None else None
        dX = np.empty((B, L, self.cfg.embed))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H)) if self.cfg.core == "lstm" else None
        for t in range(L - 1, -1, -1):
            dh = dfeat[:, t, :H] + dh_next
            if self.att is not None:
                dq, dS, dP = self.att.backward_projected(att_caches[t], dfeat[:, t, H:])
                dh += dq
                dS_acc[:, :t + 1] += dS
                dP_acc[:, :t + 1] += dP
                dh += dP_acc[:, t] @ self.att.W_s
            dh += dS_acc[:, t]
            if self.cfg.core == "gru":
                dh_next, dX[:, t] = self.cell.backward(cell_caches[t], dh)
            else:
                dh_next, dc_next, dX[:, t] = self.cell.backward(cell_caches[t], dh, dc_next)
        if self.att is not None:
            self.store.grads["gen.att.W_s"] += np.einsum("bta,bth->ah", dP_acc, S)
        self.emb.backward(emb_cache, dX)

    def log_probs(self, seqs):
        """log G(y_t | y_<t) for every position, shape (B, L)."""
        seqs = np.asarray(seqs, dtype=np.int64)
        logits, _ = self.forward(seqs)
        lp = log_softmax(logits, axis=-1)
        return np.take_along_axis(lp, seqs[:, :, None], axis=2)[:, :, 0]

    def sample(self, n, length, rng, greedy=False):
        state = self.initial_state(n, length)
        logits = self.step(state, np.full(n, self.start_token))
        out = np.empty((n, length), dtype=np.int64)
        for t in range(length):
            tok = np.argmax(logits, axis=1) if greedy else sample_categorical(softmax(logits), rng)
            out[:, t] = tok
            if t + 1 < length:
                logits = self.step(state, tok)
        return out

    def prefix_states(self, seqs):
        """Yield (t, state, logits) after consuming start + y_1..y_t, for t = 1..L-1."""
        seqs = np.asarray(seqs, dtype=np.int64)
        B, L = seqs.shape
        state = self.initial_state(B, L)
        self.step(state, np.full(B, self.start_token))
        for t in range(1, L):
            logits = self.step(state, seqs[:, t - 1])
            yield t, state, logits

    def complete(self, state, logits, prefix, length, rng):
        """Sample continuations of ``prefix`` (B, t) up to ``length`` from (state, logits)."""
        B, t = prefix.shape
        out = np.empty((B, length), dtype=np.int64)
        out[:, :t] = prefix
        for k in range(t, length):
            tok = sample_categorical(softmax(logits), rng)
            out[:, k] = tok
            if k + 1 < length:
                logits = self.step(state, tok)
        return out


class Discriminator:
    """Sequence classifier D(y) ∈ (0, 1): GRU encoder (final state) or 1-D CNN encoder."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.store = ParamStore()
        self.emb = Embedding(self.store, "disc.emb", cfg.vocab, cfg.embed, rng)
        if cfg.kind == "gru":
            self.enc = GRUCell(self.store, "disc.gru", cfg.embed, cfg.hidden, rng)
            feat = cfg.hidden
        else:
            self.enc = Conv1dMaxPool(self.store, "disc.conv", cfg.embed, cfg.widths, cfg.filters, rng)
            feat = self.enc.out_dim
        self.head = Linear(self.store, "disc.head", feat, 1, rng)

    def forward(self, seqs):
        """Logits (B,) and a cache for :meth:`backward`."""
        seqs = np.asarray(seqs, dtype=np.int64)
        X, ec = self.emb.forward(seqs)
        if self.cfg.kind == "gru":
            h = np.zeros((seqs.shape[0], self.cfg.hidden))
            caches = []
            for t in range(seqs.shape[1]):
                h, c = self.enc.step(h, X[:, t])
                caches.append(c)
            feat, enc_cache = h, caches
        else:
            feat, enc_cache = self.enc.forward(X)
        z, hc = self.head.forward(feat)
        return z[:, 0], (ec, enc_cache, hc, X.shape)

    def backward(self, cache, dz):
        ec, enc_cache, hc, xshape = cache
        dfeat = self.head.backward(hc, dz[:, None])
        if self.cfg.kind == "gru":
            dX = np.empty(xshape)
            dh = dfeat
            for t in range(xshape[1] - 1, -1, -1):
                dh, dX[:, t] = self.enc.backward(enc_cache[t], dh)
        else:
            dX = self.enc.backward(enc_cache, dfeat)
        self.emb.backward(ec, dX)

    def prob(self, seqs, batch=4096):
        seqs = np.asarray(seqs, dtype=np.int64)
        out = np.empty(len(seqs))
        for i in range(0, len(seqs), batch):
            z, _ = self.forward(seqs[i:i + batch])
            out[i:i + batch] = sigmoid(z)
        return out


class OracleModel:
    """Frozen generator-shaped network standing in for the real data distribution."""

    def __init__(self, generator):
        self.gen = generator
        for p in generator.store.params.values():
            p.flags.writeable = False

    @classmethod
    def random(cls, vocab, rng, hidden=32, embed=32, init_std=1.0, core="gru", attention=False):
        cfg = GeneratorConfig(vocab=vocab, embed=embed, hidden=hidden, core=core, attention=attention)
        return cls(Generator(cfg, rng, init_std=init_std))

    @property
    def vocab(self):
        return self.gen.vocab

    def log_probs(self, seqs, batch=2048):
        seqs = np.asarray(seqs, dtype=np.int64)
        out = np.empty(seqs.shape)
        for i in range(0, len(seqs), batch):
            out[i:i + batch] = self.gen.log_probs(seqs[i:i + batch])
        return out

    def sample(self, n, length, rng):
        return self.gen.sample(n, length, rng)
