"""Hand-differentiated layers.

Every layer registers its parameters in a shared :class:`ParamStore` under a
name prefix.  ``forward``/``step`` return the output plus a cache; the
matching ``backward`` consumes the cache and an upstream gradient,
accumulates parameter gradients into the store and returns input gradients.
All arrays are batch-major float64.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import sigmoid, softmax, uniform_init


class Linear:
    def __init__(self, store, name, in_dim, out_dim, rng, bias=True):
        self.store, self.name = store, name
        self.in_dim, self.out_dim = in_dim, out_dim
        self.W = store.add(f"{name}.W", uniform_init(rng, (out_dim, in_dim), in_dim))
        self.b = store.add(f"{name}.b", np.zeros(out_dim)) if bias else None

    def forward(self, x):
        y = x @ self.W.T
        if self.b is not None:
            y = y + self.b
        return y, x

    def backward(self, x, dy):
        x2 = x.reshape(-1, self.in_dim)
        dy2 = dy.reshape(-1, self.out_dim)
        self.store.grads[f"{self.name}.W"] += dy2.T @ x2
        if self.b is not None:
            self.store.grads[f"{self.name}.b"] += dy2.sum(axis=0)
        return dy @ self.W


class Embedding:
    def __init__(self, store, name, vocab, dim, rng):
        self.store, self.name = store, name
        self.vocab, self.dim = vocab, dim
        self.E = store.add(f"{name}.E", rng.normal(0.0, 1.0 / np.sqrt(dim), size=(vocab, dim)))

    def forward(self, ids):
        return self.E[ids], ids

    def backward(self, ids, dout):
        np.add.at(self.store.grads[f"{self.name}.E"], ids.reshape(-1), dout.reshape(-1, self.dim))


class GRUCell:
    """Gated recurrent unit over the concatenation ``[h_prev, x]``.

    z = σ(W_z·[h, x] + b_z), r = σ(W_r·[h, x] + b_r),
    h̃ = tanh(W·[r⊙h, x] + b_h), h' = (1 − z)⊙h + z⊙h̃.
    """

    def __init__(self, store, name, input_size, hidden_size, rng):
        self.store, self.name = store, name
        self.input_size, self.hidden_size = input_size, hidden_size
        H, n = hidden_size, hidden_size + input_size
        self.W_z = store.add(f"{name}.W_z", uniform_init(rng, (H, n), n))
        self.W_r = store.add(f"{name}.W_r", uniform_init(rng, (H, n), n))
        self.W = store.add(f"{name}.W", uniform_init(rng, (H, n), n))
        self.b_z = store.add(f"{name}.b_z", np.zeros(H))
        self.b_r = store.add(f"{name}.b_r", np.zeros(H))
        self.b_h = store.add(f"{name}.b_h", np.zeros(H))

    def step(self, h, x):
        if h.shape[-1] != self.hidden_size or x.shape[-1] != self.input_size:
            raise ValueError(
                f"{self.name}: expected h[..., {self.hidden_size}] and x[..., {self.input_size}], "
                f"got {h.shape} and {x.shape}"
            )
        hx = np.concatenate([h, x], axis=-1)
        z = sigmoid(hx @ self.W_z.T + self.b_z)
        r = sigmoid(hx @ self.W_r.T + self.b_r)
        rhx = np.concatenate([r * h, x], axis=-1)
        n = np.tanh(rhx @ self.W.T + self.b_h)
        h_new = (1.0 - z) * h + z * n
        return h_new, (h, hx, z, r, rhx, n)

    def backward(self, cache, dh_new):
        h, hx, z, r, rhx, n = cache
        H = self.hidden_size
        g = self.store.grads
        dz = dh_new * (n - h)
        dn = dh_new * z
        dh = dh_new * (1.0 - z)
        dan = dn * (1.0 - n * n)
        g[f"{self.name}.W"] += dan.T @ rhx
        g[f"{self.name}.b_h"] += dan.sum(axis=0)
        drhx = dan @ self.W
        drh = drhx[:, :H]
        dx = drhx[:, H:].copy()
        dh += drh * r
        dr = drh * h
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        g[f"{self.name}.W_z"] += daz.T @ hx
        g[f"{self.name}.b_z"] += daz.sum(axis=0)
        g[f"{self.name}.W_r"] += dar.T @ hx
        g[f"{self.name}.b_r"] += dar.sum(axis=0)
        dhx = daz @ self.W_z + dar @ self.W_r
        dh += dhx[:, :H]
        dx += dhx[:, H:]
        return dh, dx


class LSTMCell:
    """Four-gate LSTM over ``[h_prev, x]``; gate rows ordered (i, f, o, g)."""

    def __init__(self, store, name, input_size, hidden_size, rng):
        self.store, self.name = store, name
        self.input_size, self.hidden_size = input_size, hidden_size
        H, n = hidden_size, hidden_size + input_size
        self.W = store.add(f"{name}.W", uniform_init(rng, (4 * H, n), n))
        self.b = store.add(f"{name}.b", np.zeros(4 * H))

    def step(self, h, c, x):
        if h.shape[-1] != self.hidden_size or c.shape != h.shape or x.shape[-1] != self.input_size:
            raise ValueError(f"{self.name}: dimension mismatch {h.shape}, {c.shape}, {x.shape}")
        H = self.hidden_size
        hx = np.concatenate([h, x], axis=-1)
        a = hx @ self.W.T + self.b
        i = sigmoid(a[:, :H])
        f = sigmoid(a[:, H:2 * H])
        o = sigmoid(a[:, 2 * H:3 * H])
        gg = np.tanh(a[:, 3 * H:])
        c_new = f * c + i * gg
        tc = np.tanh(c_new)
        h_new = o * tc
        return h_new, c_new, (hx, c, i, f, o, gg, tc)

    def backward(self, cache, dh_new, dc_new):
        hx, c, i, f, o, gg, tc = cache
        H = self.hidden_size
        do = dh_new * tc
        dc = dc_new + dh_new * o * (1.0 - tc * tc)
        di = dc * gg
        dgg = dc * i
        df = dc * c
        dc_prev = dc * f
        da = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dgg * (1 - gg * gg)], axis=-1
        )
        self.store.grads[f"{self.name}.W"] += da.T @ hx
        self.store.grads[f"{self.name}.b"] += da.sum(axis=0)
        dhx = da @ self.W
        return dhx[:, :H], dc_prev, dhx[:, H:]


class Attention:
    """Additive attention: e_i = vᵀ tanh(W_h h + W_s s_i + b), α = softmax(e), c = Σ α_i s_i."""

    def __init__(self, store, name, query_dim, state_dim, attn_dim, rng):
        self.store, self.name = store, name
        self.query_dim, self.state_dim, self.attn_dim = query_dim, state_dim, attn_dim
        self.v = store.add(f"{name}.v", uniform_init(rng, (attn_dim,), attn_dim))
        self.W_h = store.add(f"{name}.W_h", uniform_init(rng, (attn_dim, query_dim), query_dim))
        self.W_s = store.add(f"{name}.W_s", uniform_init(rng, (attn_dim, state_dim), state_dim))
        self.b = store.add(f"{name}.b", np.zeros(attn_dim))

    def project(self, S):
        """W_s·s_i for every state; callers may cache this across steps."""
        return S @ self.W_s.T

    def step_projected(self, h, S, P):
        if S.shape[1] == 0:
            raise ValueError(f"{self.name}: attention over an empty sequence")
        q = h @ self.W_h.T + self.b
        U = np.tanh(P + q[:, None, :])
        e = U @ self.v
        alpha = softmax(e, axis=1)
        ctx = np.einsum("bt,bts->bs", alpha, S)
        return alpha, ctx, (h, S, U, alpha)

    def backward_projected(self, cache, dctx):
        """Returns (dh, dS through the context, dP) for a projected step."""
        h, S, U, alpha = cache
        g = self.store.grads
        dalpha = np.einsum("bs,bts->bt", dctx, S)
        dS = alpha[:, :, None] * dctx[:, None, :]
        de = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
        g[f"{self.name}.v"] += np.einsum("bt,bta->a", de, U)
        dpre = (de[:, :, None] * self.v) * (1.0 - U * U)
        dq = dpre.sum(axis=1)
        g[f"{self.name}.b"] += dq.sum(axis=0)
        g[f"{self.name}.W_h"] += dq.T @ h
        dh = dq @ self.W_h
        return dh, dS, dpre

    def project_backward(self, S, dP):
        """Push a projection gradient into W_s; returns the gradient w.r.t. S."""
        self.store.grads[f"{self.name}.W_s"] += np.einsum("bta,bts->as", dP, S)
        return dP @ self.W_s

    def step(self, h, S):
        if S.ndim != 3 or S.shape[1] == 0:
            raise ValueError(f"{self.name}: need states shaped (batch, T>=1, dim), got {S.shape}")
        P = self.project(S)
        alpha, ctx, cache = self.step_projected(h, S, P)
        return alpha, ctx, cache

    def backward(self, cache, dctx):
        dh, dS, dP = self.backward_projected(cache, dctx)
        dS = dS + self.project_backward(cache[1], dP)
        return dh, dS


class Conv1dMaxPool:
    """Text-CNN style encoder: per width, conv over time, ReLU, max over time."""

    def __init__(self, store, name, in_dim, widths, n_filters, rng):
        self.store, self.name = store, name
        self.in_dim, self.widths, self.n_filters = in_dim, tuple(widths), n_filters
        self.W = {}
        for w in self.widths:
            fan = w * in_dim
            self.W[w] = store.add(f"{name}.W{w}", uniform_init(rng, (n_filters, fan), fan))
            store.add(f"{name}.b{w}", np.zeros(n_filters))

    @property
    def out_dim(self):
        return self.n_filters * len(self.widths)

    def forward(self, X):
        B, L, E = X.shape
        outs, caches = [], []
        for w in self.widths:
            if L < w:
                raise ValueError(f"{self.name}: sequence length {L} shorter than filter width {w}")
            win = sliding_window_view(X, (w, E), axis=(1, 2))[:, :, 0].reshape(B, L - w + 1, w * E)
            Y = win @ self.W[w].T + self.store[f"{self.name}.b{w}"]
            R = np.maximum(Y, 0.0)
            idx = np.argmax(R, axis=1)
            outs.append(np.take_along_axis(R, idx[:, None, :], axis=1)[:, 0, :])
            caches.append((win, Y, idx))
        return np.concatenate(outs, axis=-1), (X.shape, caches)

    def backward(self, cache, dout):
        shape, caches = cache
        B, L, E = shape
        dX = np.zeros(shape)
        F = self.n_filters
        g = self.store.grads
        for k, (w, (win, Y, idx)) in enumerate(zip(self.widths, caches)):
            dR = np.zeros_like(Y)
            np.put_along_axis(dR, idx[:, None, :], dout[:, None, k * F:(k + 1) * F], axis=1)
            dY = dR * (Y > 0)
            g[f"{self.name}.W{w}"] += np.einsum("btf,btk->fk", dY, win)
            g[f"{self.name}.b{w}"] += dY.sum(axis=(0, 1))
            dwin = dY @ self.W[w]
            T = L - w + 1
            for j in range(w):
                dX[:, j:j + T, :] += dwin[:, :, j * E:(j + 1) * E]
        return dX
