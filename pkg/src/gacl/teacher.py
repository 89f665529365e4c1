"""Stateful teacher: history-conditioned latent proposals trained on regret."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .gridnav import GridTask
from .policyopt import ActorCritic, PPOConfig, gae, ppo_epochs
from .taskgen import ReferenceSet
from .taskvae import VaeParams, decode_to_task
from .tensorcore import clamp_log_std, gaussian_logprob

log = logging.getLogger(__name__)

REFERENCE = "reference"
SYNTHETIC = "synthetic"

TEACHER_PPO = PPOConfig(lr=1e-4, epochs=10, gamma=0.99, hidden=(128, 128))


@dataclass(frozen=True)
class TeacherConfig:
    history: int = 8
    latent_dim: int = 32
    epsilon: float = 0.3
    latent_clamp: float = 4.0
    window: int = 16  # most recent synthetic steps used by each teacher update
    ppo: PPOConfig = TEACHER_PPO

    @property
    def state_dim(self) -> int:
        return self.history * (self.latent_dim + 1)


@dataclass
class HistoryRecord:
    latent: np.ndarray
    reward: float


@dataclass
class TeacherState:
    capacity: int = 8
    latent_dim: int = 32
    history: list[HistoryRecord] = field(default_factory=list)  # most recent first
    epoch: int = 0
    n_rewards: int = 0
    reward_mean: float = 0.0
    reward_m2: float = 0.0

    def append(self, latent, reward: float) -> None:
        latent = np.asarray(latent, dtype=np.float64).copy()
        if latent.shape != (self.latent_dim,):
            raise ValueError(f"latent shape {latent.shape} != ({self.latent_dim},)")
        reward = float(reward)
        self.n_rewards += 1
        delta = reward - self.reward_mean
        self.reward_mean += delta / self.n_rewards
        self.reward_m2 += delta * (reward - self.reward_mean)
        self.history.insert(0, HistoryRecord(latent, reward))
        del self.history[self.capacity :]
        self.epoch += 1

    @property
    def reward_std(self) -> float:
        return math.sqrt(self.reward_m2 / self.n_rewards) if self.n_rewards else 0.0


def encode_state(state: TeacherState) -> np.ndarray:
    """Flat ``K * (latent_dim + 1)`` vector, most recent record first, zero-padded."""
    width = state.latent_dim + 1
    out = np.zeros(state.capacity * width)
    std = max(state.reward_std, 1e-8)
    for i, rec in enumerate(state.history[: state.capacity]):
        out[i * width : i * width + state.latent_dim] = rec.latent
        out[i * width + state.latent_dim] = (rec.reward - state.reward_mean) / std
    return out


def make_teacher(cfg: TeacherConfig, rng: np.random.Generator) -> ActorCritic:
    return ActorCritic.create(cfg.state_dim, cfg.latent_dim, cfg.ppo, rng)


@dataclass
class Proposal:
    obs: np.ndarray
    raw: np.ndarray  # pre-clamp sample, used for log-probs
    latent: np.ndarray
    logp: float
    value: float


def propose_full(params: ActorCritic, obs: np.ndarray, rng: np.random.Generator, clamp: float = 4.0) -> Proposal:
    mean = params.policy(obs)
    value = float(params.value(obs)[0])
    log_std = clamp_log_std(params.log_std)
    raw = mean + np.exp(log_std) * rng.standard_normal(params.act_dim)
    logp = float(gaussian_logprob(mean, log_std, raw))
    return Proposal(obs, raw, np.clip(raw, -clamp, clamp), logp, value)


def propose(params: ActorCritic, state: TeacherState, rng: np.random.Generator, clamp: float = 4.0) -> np.ndarray:
    """Sample a latent task vector conditioned on the teacher state."""
    return propose_full(params, encode_state(state), rng, clamp).latent


@dataclass
class Selection:
    task: GridTask
    source: str
    latent: np.ndarray
    ref_index: int = -1
    proposal: Proposal | None = None


def select_task(
    epsilon: float,
    refs: ReferenceSet,
    params: ActorCritic,
    state: TeacherState,
    rng: np.random.Generator,
    vae: VaeParams,
    ref_latents: np.ndarray,
    teacher_rng: np.random.Generator | None = None,
    obs: np.ndarray | None = None,
    clamp: float = 4.0,
) -> Selection:
    """Reference task with probability ``epsilon``, otherwise a decoded teacher proposal.

    ``rng`` drives the coin flip and the reference draw; proposals draw from
    ``teacher_rng`` only, so reference epochs leave the teacher stream untouched.
    ``obs`` overrides the encoded state (the stateless baseline passes zeros).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0 and len(refs) == 0:
        raise ValueError("reference sampling requested with an empty reference set")
    if rng.random() < epsilon:
        i = int(rng.integers(len(refs)))
        return Selection(refs.tasks[i], REFERENCE, np.asarray(ref_latents[i], dtype=np.float64), i)
    if obs is None:
        obs = encode_state(state)
    prop = propose_full(params, obs, teacher_rng if teacher_rng is not None else rng, clamp)
    return Selection(decode_to_task(vae, prop.latent), SYNTHETIC, prop.latent, -1, prop)


def regret(v_antagonist: float, v_student: float) -> float:
    if not (math.isfinite(v_antagonist) and math.isfinite(v_student)):
        raise ValueError("regret of non-finite values")
    return v_antagonist - v_student


@dataclass(frozen=True)
class RegretRecord:
    task_id: str
    v_antagonist: float
    v_student: float
    regret: float
    source: str


@dataclass
class TeacherStep:
    obs: np.ndarray
    action: np.ndarray  # pre-clamp sample
    logp: float
    value: float
    reward: float  # regret


def episode_advantages(steps: list[TeacherStep], gamma: float, lam: float, bootstrap: float = 0.0):
    """Raw GAE advantages and returns for a run of teacher steps (no terminal inside the run)."""
    rewards = np.array([s.reward for s in steps])
    values = np.array([s.value for s in steps])
    return gae(rewards, values, np.zeros(len(steps), dtype=bool), gamma, lam, bootstrap)


def teacher_update(
    params: ActorCritic,
    episode: list[TeacherStep],
    rng: np.random.Generator,
    gamma: float | None = None,
    lam: float | None = None,
    bootstrap: float = 0.0,
) -> dict:
    """Clipped-surrogate update with regret as reward and GAE on the teacher's value head.

    ``episode`` is the ordered run of synthetic steps since the last update.
    ``bootstrap`` is the value of the state following the last step.
    """
    steps = [s for s in episode if math.isfinite(s.reward)]
    if len(steps) < len(episode):
        log.warning("teacher: %d non-finite regret steps excluded", len(episode) - len(steps))
    if not steps:
        return {}
    cfg = params.cfg
    adv, ret = episode_advantages(steps, cfg.gamma if gamma is None else gamma, cfg.lam if lam is None else lam, bootstrap)
    obs = np.stack([s.obs for s in steps])
    act = np.stack([s.action for s in steps])
    logp = np.array([s.logp for s in steps])
    return ppo_epochs(params, obs, act, logp, adv, ret, rng, minibatch=len(steps))


def save_teacher(params: ActorCritic, state: TeacherState, path) -> None:
    arrays = dict(params.named_params())
    lat = np.zeros((state.capacity, state.latent_dim))
    rew = np.zeros(state.capacity)
    for i, rec in enumerate(state.history):
        lat[i] = rec.latent
        rew[i] = rec.reward
    arrays["state.latents"] = lat
    arrays["state.rewards"] = rew
    arrays["state.stats"] = np.array([len(state.history), state.epoch, state.n_rewards, state.reward_mean, state.reward_m2], dtype=np.float64)
    save_checkpoint(path, arrays)
