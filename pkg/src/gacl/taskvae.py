"""Variational autoencoder over occupancy grids; the teacher's latent task space."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .checkpoint import assign, load_checkpoint, save_checkpoint
from .gridnav import GridTask
from .rng import stream
from .taskgen import ReferenceSet, clear_neighborhood, default_endpoints, force_border, repair
from .tensorcore import AdamState, Mlp, adam_step, bump, mlp_backward, mlp_forward

log = logging.getLogger(__name__)

LATENT_DIM = 32
LOGVAR_MIN, LOGVAR_MAX = -6.0, 2.0
PROB_EPS = 1e-7


class VaeDivergenceError(RuntimeError):
    pass


@dataclass
class VaeParams:
    width: int
    height: int
    encoder: Mlp  # cells -> 256 -> 128 (tanh)
    mu_head: Mlp
    logvar_head: Mlp
    decoder: Mlp  # latent -> 128 -> 256 -> cells logits

    @property
    def latent_dim(self) -> int:
        return self.mu_head.sizes[-1]

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def mlps(self):
        return {"enc": self.encoder, "mu": self.mu_head, "lv": self.logvar_head, "dec": self.decoder}

    def named_params(self) -> dict[str, np.ndarray]:
        return {f"{p}.{k}": v for p, m in self.mlps().items() for k, v in m.named_params().items()}


def init_vae(width: int = 16, height: int = 16, latent_dim: int = LATENT_DIM, seed: int = 0) -> VaeParams:
    rng = stream(seed, "vae", "init")
    n = width * height
    return VaeParams(
        width,
        height,
        Mlp.create((n, 256, 128), rng, output="tanh"),
        Mlp.create((128, latent_dim), rng),
        Mlp.create((128, latent_dim), rng, out_gain=0.1),
        Mlp.create((latent_dim, 128, 256, n), rng),
    )


def _flat(params: VaeParams, grid) -> tuple[np.ndarray, bool]:
    g = np.asarray(grid, dtype=np.float64)
    single = g.ndim == 2
    if single:
        g = g[None]
    if g.shape[1:] != (params.height, params.width):
        raise ValueError(f"grid shape {g.shape[1:]} != ({params.height}, {params.width})")
    return g.reshape(g.shape[0], -1), single


def _encode_flat(params: VaeParams, x):
    h, c_enc = mlp_forward(params.encoder, x)
    mu, c_mu = mlp_forward(params.mu_head, h)
    lv_raw, c_lv = mlp_forward(params.logvar_head, h)
    return mu, lv_raw, (c_enc, c_mu, c_lv)


def encode(params: VaeParams, grid) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and clamped log-variance; batched when ``grid`` is (N, H, W)."""
    x, single = _flat(params, grid)
    mu, lv_raw, _ = _encode_flat(params, x)
    lv = np.clip(lv_raw, LOGVAR_MIN, LOGVAR_MAX)
    return (mu[0], lv[0]) if single else (mu, lv)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def decode(params: VaeParams, z) -> np.ndarray:
    """Per-cell occupancy probabilities shaped like the grid."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    logits, _ = mlp_forward(params.decoder, z[None] if single else z)
    p = _sigmoid(logits).reshape(-1, params.height, params.width)
    return p[0] if single else p


def elbo_loss(grid, probs, mu, logvar, kl_weight: float):
    """``(loss, recon, kl)`` averaged over the batch.

    recon is the mean per-cell binary cross-entropy; kl is the Gaussian KL to
    N(0, I) divided by the latent dimension.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    b = mu.shape[0]
    x = np.asarray(grid, dtype=np.float64).reshape(b, -1)
    p = np.clip(np.asarray(probs, dtype=np.float64).reshape(b, -1), PROB_EPS, 1.0 - PROB_EPS)
    bce = -(x * np.log(p) + (1.0 - x) * np.log(1.0 - p))
    recon = float(np.mean(bce))
    kl = float(np.mean(-0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar), axis=1) / mu.shape[1]))
    return recon + kl_weight * kl, recon, kl


def _softplus(z):
    return np.logaddexp(0.0, z)


def loss_and_grads(params: VaeParams, x: np.ndarray, noise: np.ndarray, kl_weight: float):
    """Reparameterized ELBO on a flat batch with exact gradients.

    The reconstruction term is evaluated on logits (``softplus(l) - x*l``),
    which equals the clamped form away from saturation.
    """
    b, n = x.shape
    mu, lv_raw, (c_enc, c_mu, c_lv) = _encode_flat(params, x)
    lv = np.clip(lv_raw, LOGVAR_MIN, LOGVAR_MAX)
    std = np.exp(0.5 * lv)
    z = mu + std * noise
    logits, c_dec = mlp_forward(params.decoder, z)
    recon = float(np.mean(_softplus(logits) - x * logits))
    d = mu.shape[1]
    kl = float(np.mean(-0.5 * np.sum(1.0 + lv - mu * mu - np.exp(lv), axis=1) / d))
    loss = recon + kl_weight * kl

    g_logits = (_sigmoid(logits) - x) / (b * n)
    g_dec, g_z = mlp_backward(params.decoder, c_dec, g_logits)
    g_mu = g_z + kl_weight * mu / (b * d)
    g_lv = g_z * noise * 0.5 * std + kl_weight * (-0.5 * (1.0 - np.exp(lv))) / (b * d)
    g_lv = g_lv * ((lv_raw >= LOGVAR_MIN) & (lv_raw <= LOGVAR_MAX))
    g_muh, g_h1 = mlp_backward(params.mu_head, c_mu, g_mu)
    g_lvh, g_h2 = mlp_backward(params.logvar_head, c_lv, g_lv)
    g_enc, _ = mlp_backward(params.encoder, c_enc, g_h1 + g_h2)
    grads = {}
    for prefix, gd in (("enc", g_enc), ("mu", g_muh), ("lv", g_lvh), ("dec", g_dec)):
        grads.update({f"{prefix}.{k}": v for k, v in gd.items()})
    return loss, recon, kl, grads


def _eval_loss(params: VaeParams, x: np.ndarray, kl_weight: float) -> float:
    if len(x) == 0:
        return float("nan")
    mu, lv_raw, _ = _encode_flat(params, x)
    lv = np.clip(lv_raw, LOGVAR_MIN, LOGVAR_MAX)
    p = decode(params, mu).reshape(len(x), -1)
    return elbo_loss(x, p, mu, lv, kl_weight)[0]


def pretrain(
    refs: ReferenceSet,
    epochs: int = 2000,
    batch: int = 32,
    lr: float = 3e-4,
    kl_weight: float = 0.5,
    seed: int = 0,
    holdout: float = 0.1,
    latent_dim: int = LATENT_DIM,
    params: VaeParams | None = None,
):
    """Minibatch Adam on the ELBO.  Returns ``(params, curve)``.

    The KL weight ramps linearly from 0 to ``kl_weight`` over the first 20% of
    epochs.  ``curve`` has one dict per epoch, with epoch 0 measured before
    any update.
    """
    if len(refs) < batch:
        raise ValueError(f"need at least {batch} reference tasks, got {len(refs)}")
    t0 = refs.tasks[0]
    if params is None:
        params = init_vae(t0.width, t0.height, latent_dim, seed)
    grids = np.stack([t.occupancy for t in refs.tasks]).reshape(len(refs), -1).astype(np.float64)
    order = stream(seed, "vae", "split").permutation(len(refs))
    n_val = int(round(holdout * len(refs)))
    val, train = grids[order[:n_val]], grids[order[n_val:]]
    curve = [{"epoch": 0, "kl_weight": 0.0, "train_loss": _eval_loss(params, train, kl_weight), "val_loss": _eval_loss(params, val, kl_weight)}]
    if epochs <= 0:
        return params, curve

    adam = AdamState(lr=lr)
    flat = params.named_params()
    shuffle = stream(seed, "vae", "shuffle")
    noise_rng = stream(seed, "vae", "noise")
    ramp = max(1.0, 0.2 * epochs)
    for epoch in range(1, epochs + 1):
        beta = kl_weight * min(1.0, (epoch - 1) / ramp)
        perm = shuffle.permutation(len(train))
        losses = []
        for i in range(0, len(train), batch):
            xb = train[perm[i : i + batch]]
            noise = noise_rng.standard_normal((len(xb), params.latent_dim))
            loss, _, _, grads = loss_and_grads(params, xb, noise, beta)
            if not math.isfinite(loss):
                raise VaeDivergenceError(f"VAE loss became non-finite at epoch {epoch}")
            adam_step(adam, flat, grads)
            bump(*params.mlps().values())
            losses.append(loss)
        curve.append({"epoch": epoch, "kl_weight": beta, "train_loss": float(np.mean(losses)), "val_loss": _eval_loss(params, val, kl_weight)})
        if epoch % 500 == 0:
            log.info("vae epoch %d train %.4f val %.4f", epoch, curve[-1]["train_loss"], curve[-1]["val_loss"])
    return params, curve


def binarize(probs: np.ndarray) -> np.ndarray:
    """Occupied iff probability > 0.5 (an exact 0.5 tie is free)."""
    return np.asarray(probs) > 0.5


def reconstruction_accuracy(params: VaeParams, tasks: list[GridTask]) -> np.ndarray:
    """Per-map pixel accuracy of the binarized decode of each map's posterior mean."""
    grids = np.stack([t.occupancy for t in tasks])
    mu, _ = encode(params, grids)
    rec = binarize(decode(params, mu))
    return (rec == grids).reshape(len(tasks), -1).mean(axis=1)


def decode_to_task(params: VaeParams, z) -> GridTask:
    """Concrete, always-solvable task for latent ``z``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.latent_dim,) or not np.all(np.isfinite(z)):
        raise ValueError("latent must be a finite vector of the model's latent dimension")
    grid = binarize(decode(params, z)).copy()
    force_border(grid)
    start, goal = default_endpoints(params.width, params.height)
    s_cell = (int(start[1]), int(start[0]))
    g_cell = (int(goal[1]), int(goal[0]))
    clear_neighborhood(grid, s_cell)
    clear_neighborhood(grid, g_cell)
    grid = repair(grid, s_cell, g_cell)
    return GridTask(params.width, params.height, grid, start, goal)


def save_vae(params: VaeParams, path) -> None:
    arrays = {"meta.shape": np.array([params.width, params.height, params.latent_dim], dtype=np.float64)}
    arrays.update(params.named_params())
    save_checkpoint(path, arrays)


def load_vae(path) -> VaeParams:
    data = load_checkpoint(path)
    w, h, d = (int(v) for v in data["meta.shape"].ravel())
    params = init_vae(w, h, d, seed=0)
    assign(params.named_params(), data)
    return params
