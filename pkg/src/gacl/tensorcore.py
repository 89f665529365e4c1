"""Dense MLPs with hand-written reverse mode, Adam, and diagonal-Gaussian helpers.

Weights are stored ``(out, in)`` so a layer computes ``x @ W.T + b``.  All
arrays are float64.  Batched inputs are ``(batch, in)``; a 1-D input is
treated as a batch of one and the output is squeezed back.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_LOG_2PI = math.log(2.0 * math.pi)

_ACTS = ("tanh", "identity", "sigmoid")


class StaleCacheError(RuntimeError):
    pass


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    activations: tuple[str, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    version: int = 0

    @classmethod
    def create(cls, sizes, rng: np.random.Generator, hidden="tanh", output="identity", out_gain=1.0):
        sizes = tuple(int(s) for s in sizes)
        acts = tuple([hidden] * (len(sizes) - 2) + [output])
        for a in acts:
            if a not in _ACTS:
                raise ValueError(f"unknown activation {a!r}")
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = out_gain if i == len(sizes) - 2 else 1.0
            weights.append(rng.normal(0.0, gain / math.sqrt(n_in), size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(sizes, acts, weights, biases)

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"l{i}.W"] = w
            out[f"l{i}.b"] = b
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.named_params().values())

    def __call__(self, x):
        return mlp_forward(self, x)[0]


@dataclass
class MlpCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    outputs: np.ndarray
    version: int
    owner: int
    squeeze: bool


def _activate(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def mlp_forward(params: Mlp, x) -> tuple[np.ndarray, MlpCache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.sizes[0]:
        raise ValueError(f"input dim {h.shape[1]} != {params.sizes[0]}")
    inputs, pre = [], []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = _activate(act, z)
    cache = MlpCache(inputs, pre, h, params.version, id(params), squeeze)
    return (h[0] if squeeze else h), cache


def mlp_backward(params: Mlp, cache: MlpCache, output_grad) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of ``sum(output * output_grad)`` w.r.t. parameters and input."""
    if cache.owner != id(params) or cache.version != params.version:
        raise StaleCacheError("cache does not belong to the current parameters")
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    grads = {}
    for i in range(len(params.weights) - 1, -1, -1):
        act = params.activations[i]
        if act == "tanh":
            a = np.tanh(cache.pre[i])
            g = g * (1.0 - a * a)
        elif act == "sigmoid":
            s = _activate(act, cache.pre[i])
            g = g * s * (1.0 - s)
        grads[f"l{i}.W"] = g.T @ cache.inputs[i]
        grads[f"l{i}.b"] = g.sum(axis=0)
        g = g @ params.weights[i]
    return grads, (g[0] if cache.squeeze else g)


# ------------------------------------------------------------------------ Adam


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    skipped: int = 0


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> bool:
    """In-place Adam update.  Returns False (and skips) on non-finite gradients."""
    for k, g in grads.items():
        if params[k].shape != g.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {params[k].shape} for {k}")
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            log.warning("adam: non-finite gradient in %s, step skipped", k)
            return False
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[k] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return True


def bump(*mlps: Mlp) -> None:
    """Mark parameters as changed so older caches are rejected."""
    for m in mlps:
        m.version += 1


# -------------------------------------------------------------------- Gaussian


def clamp_log_std(log_std):
    return np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)


def gaussian_logprob(mean, log_std, sample):
    """Diagonal-Gaussian log density, summed over the last axis."""
    ls = clamp_log_std(np.asarray(log_std, dtype=np.float64))
    z = (np.asarray(sample) - mean) * np.exp(-ls)
    return -0.5 * np.sum(z * z + 2.0 * ls + _LOG_2PI, axis=-1)


def gaussian_sample(mean, log_std, noise):
    return mean + np.exp(clamp_log_std(np.asarray(log_std, dtype=np.float64))) * noise


def gaussian_entropy(log_std) -> float:
    ls = clamp_log_std(np.asarray(log_std, dtype=np.float64))
    return float(np.sum(ls + 0.5 * (_LOG_2PI + 1.0)))


def gaussian_logprob_grads(mean, log_std, sample):
    """Per-sample ``(d logp / d mean, d logp / d log_std)``; the latter is zero where clamped."""
    raw = np.asarray(log_std, dtype=np.float64)
    ls = clamp_log_std(raw)
    inv_var = np.exp(-2.0 * ls)
    diff = np.asarray(sample) - mean
    d_mean = diff * inv_var
    d_ls = diff * diff * inv_var - 1.0
    d_ls = d_ls * ((raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX))
    return d_mean, d_ls
