"""Parameter storage, activations, optimizers, gradient checking, checkpoints."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


class NonFiniteGradientError(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


class ParamStore:
    """Named float64 arrays with a parallel gradient store of identical shapes."""

    def __init__(self):
        self.params = {}
        self.grads = {}

    def add(self, name, value):
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def num_params(self):
        return sum(p.size for p in self.params.values())

    def copy_from(self, other):
        for k, v in other.params.items():
            self.params[k][...] = v

    def snapshot(self):
        return {k: v.copy() for k, v in self.params.items()}

    def restore(self, snap):
        for k, v in snap.items():
            self.params[k][...] = v

    def grads_finite(self):
        return all(np.all(np.isfinite(g)) for g in self.grads.values())

    def shapes(self):
        return {k: tuple(v.shape) for k, v in self.params.items()}


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x, axis=-1):
    # max-subtraction leaves the result unchanged and avoids overflow
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    sgd: bool = False
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
            "sgd": self.sgd, "step": self.step,
            "m": {k: a.ravel().tolist() for k, a in self.m.items()},
            "v": {k: a.ravel().tolist() for k, a in self.v.items()},
        }

    @classmethod
    def from_dict(cls, d, store):
        st = cls(d["lr"], d["beta1"], d["beta2"], d["eps"], d["sgd"], d["step"])
        st.m = {k: np.array(a, dtype=np.float64).reshape(store[k].shape) for k, a in d["m"].items()}
        st.v = {k: np.array(a, dtype=np.float64).reshape(store[k].shape) for k, a in d["v"].items()}
        return st


def adam_update(store, state, clip_norm=None):
    """Apply one optimizer step to ``store`` using its gradients.

    With ``state.sgd`` the step is the literal ``θ ← θ − lr·∇θ``; otherwise the
    bias-corrected adaptive-moment update.  A non-finite gradient raises
    :class:`NonFiniteGradientError` and leaves the store untouched.
    """
    if not store.grads_finite():
        bad = [k for k, g in store.grads.items() if not np.all(np.isfinite(g))]
        raise NonFiniteGradientError(f"non-finite gradient in {bad}")
    scale = 1.0
    if clip_norm is not None:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in store.grads.values()))
        if norm > clip_norm:
            scale = clip_norm / norm
    state.step += 1
    if state.sgd:
        for k, p in store.params.items():
            p -= state.lr * (scale * store.grads[k])
        return store
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for k, p in store.params.items():
        g = scale * store.grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / c1 if c1 > 0 else m
        vhat = v / c2 if c2 > 0 else v
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return store


def grad_check(loss_and_grads, store, eps=1e-5, names=None, max_coords=None, rng=None, floor=1e-6):
    """Compare analytic gradients against central differences.

    ``loss_and_grads()`` must zero the store's gradients, run forward and
    backward, and return the scalar loss.  Every coordinate of every named
    parameter is perturbed (or a random subset of ``max_coords`` per tensor).
    The relative error per coordinate is ``|a − n| / max(|a|, |n|, floor)``;
    returns the worst value and where it occurred.
    """
    loss_and_grads()
    analytic = {k: g.copy() for k, g in store.grads.items()}
    worst = (0.0, None, None)
    for name in names or list(store.params):
        p = store.params[name]
        flat = p.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        a_flat = analytic[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_and_grads()
            flat[i] = orig - eps
            lm = loss_and_grads()
            flat[i] = orig
            num = (lp - lm) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - num) / max(abs(a), abs(num), floor)
            if err > worst[0]:
                worst = (err, name, int(i))
    loss_and_grads()
    return worst


def save_checkpoint(path, store, extra=None):
    """Write parameters as a JSON document ``{format_version, layers, extra}``."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "layers": {k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in store.params.items()},
    }
    if extra is not None:
        doc["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path, store):
    """Load a checkpoint into ``store``, validating names and shapes."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    layers = doc["layers"]
    if set(layers) != set(store.params):
        missing = sorted(set(store.params) - set(layers))
        unknown = sorted(set(layers) - set(store.params))
        raise CheckpointError(f"layer mismatch: missing {missing}, unexpected {unknown}")
    for k, entry in layers.items():
        shape = tuple(entry["shape"])
        if shape != store[k].shape:
            raise CheckpointError(f"{k}: checkpoint shape {shape} != model shape {store[k].shape}")
        vals = np.array(entry["values"], dtype=np.float64)
        if vals.size != store[k].size:
            raise CheckpointError(f"{k}: {vals.size} values for shape {shape}")
        store[k][...] = vals.reshape(shape)
    return doc.get("extra")
