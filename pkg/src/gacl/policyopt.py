"""PPO for the navigation agents: rollouts, GAE, clipped-surrogate updates."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .checkpoint import assign, load_checkpoint, save_checkpoint
from .gridnav import (
    COLLIDED,
    DEFAULT_NAV,
    REACHED_GOAL,
    RUNNING,
    TIMED_OUT,
    GridTask,
    NavConfig,
    advance,
    clip_actions,
    observe_batch,
    stack_tasks,
)
from .tensorcore import (
    AdamState,
    Mlp,
    adam_step,
    bump,
    clamp_log_std,
    gaussian_entropy,
    gaussian_logprob,
    gaussian_logprob_grads,
    mlp_backward,
    mlp_forward,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PPOConfig:
    lr: float = 3e-4
    epochs: int = 5
    clip: float = 0.2
    c_value: float = 0.5
    c_entropy: float = 0.01
    gamma: float = 0.99
    lam: float = 0.95
    minibatch: int = 256
    hidden: tuple[int, ...] = (64, 64)
    init_log_std: float = 0.0


STUDENT_PPO = PPOConfig()


@dataclass
class ActorCritic:
    """Gaussian policy with state-independent log-std plus a separate value MLP."""

    policy: Mlp
    log_std: np.ndarray
    value: Mlp
    adam: AdamState
    cfg: PPOConfig = field(default=STUDENT_PPO)

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, cfg: PPOConfig, rng: np.random.Generator):
        sizes = (obs_dim, *cfg.hidden)
        return cls(
            policy=Mlp.create((*sizes, act_dim), rng, out_gain=0.01),
            log_std=np.full(act_dim, cfg.init_log_std),
            value=Mlp.create((*sizes, 1), rng),
            adam=AdamState(lr=cfg.lr),
            cfg=cfg,
        )

    @property
    def obs_dim(self) -> int:
        return self.policy.sizes[0]

    @property
    def act_dim(self) -> int:
        return self.policy.sizes[-1]

    def named_params(self) -> dict[str, np.ndarray]:
        out = {f"pi.{k}": v for k, v in self.policy.named_params().items()}
        out["log_std"] = self.log_std
        out.update({f"vf.{k}": v for k, v in self.value.named_params().items()})
        return out

    def save(self, path) -> None:
        save_checkpoint(path, self.named_params())

    def load(self, path) -> "ActorCritic":
        assign(self.named_params(), load_checkpoint(path))
        bump(self.policy, self.value)
        return self


AgentParams = ActorCritic


def make_agent(nav: NavConfig = DEFAULT_NAV, cfg: PPOConfig = STUDENT_PPO, rng: np.random.Generator | None = None) -> ActorCritic:
    if rng is None:
        rng = np.random.default_rng(0)
    return ActorCritic.create(nav.obs_dim, 2, cfg, rng)


@dataclass
class TrajectoryBatch:
    obs: np.ndarray  # (n, T, obs_dim)
    actions: np.ndarray  # (n, T, 2) pre-clip samples
    logp: np.ndarray  # (n, T)
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray  # (n, T) bool
    speeds: np.ndarray  # (n, T) clipped linear velocity
    lengths: np.ndarray  # (n,)
    status: list[str]
    final_poses: np.ndarray  # (n, 3)
    tasks: list[GridTask]

    @property
    def n_envs(self) -> int:
        return len(self.lengths)

    @property
    def mask(self) -> np.ndarray:
        return np.arange(self.rewards.shape[1])[None, :] < self.lengths[:, None]

    @property
    def episode_returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)

    def discounted_returns(self, gamma: float) -> np.ndarray:
        return np.array([discounted_return(self.rewards[i, : self.lengths[i]], gamma) for i in range(self.n_envs)])


def collect(
    agent: ActorCritic,
    tasks: list[GridTask],
    n_envs: int,
    horizon: int,
    rng: np.random.Generator,
    nav: NavConfig = DEFAULT_NAV,
    deterministic: bool = False,
) -> TrajectoryBatch:
    """Run one episode per environment; tasks are cycled across environments.

    Each environment draws its action noise from its own child of ``rng``, so
    the first ``k`` episodes of an ``n``-env batch equal a ``k``-env batch.
    """
    if n_envs < 1 or not tasks:
        raise ValueError("collect needs n_envs >= 1 and at least one task")
    env_tasks = [tasks[i % len(tasks)] for i in range(n_envs)]
    grids, goals, sizes = stack_tasks(env_tasks)
    noise = np.stack([child.standard_normal((horizon, agent.act_dim)) for child in rng.spawn(n_envs)])
    poses = np.array([t.start for t in env_tasks], dtype=np.float64)
    d = agent.obs_dim
    obs_buf = np.zeros((n_envs, horizon, d))
    act_buf = np.zeros((n_envs, horizon, agent.act_dim))
    logp_buf = np.zeros((n_envs, horizon))
    rew_buf = np.zeros((n_envs, horizon))
    val_buf = np.zeros((n_envs, horizon))
    done_buf = np.zeros((n_envs, horizon), dtype=bool)
    speed_buf = np.zeros((n_envs, horizon))
    lengths = np.zeros(n_envs, dtype=np.int64)
    status = [RUNNING] * n_envs
    active = np.ones(n_envs, dtype=bool)
    log_std = clamp_log_std(agent.log_std)
    std = np.exp(log_std)
    for t in range(horizon):
        if not active.any():
            break
        obs = observe_batch(grids, poses, goals, sizes, nav)
        mean = agent.policy(obs)
        value = agent.value(obs)[:, 0]
        act = mean if deterministic else mean + std * noise[:, t]
        logp = gaussian_logprob(mean, log_std, act)
        clipped = clip_actions(act, nav)
        new, reward, collided, reached = advance(grids, poses, goals, clipped, nav)
        idx = np.nonzero(active)[0]
        obs_buf[idx, t] = obs[idx]
        act_buf[idx, t] = act[idx]
        logp_buf[idx, t] = logp[idx]
        rew_buf[idx, t] = reward[idx]
        val_buf[idx, t] = value[idx]
        speed_buf[idx, t] = clipped[idx, 0]
        poses[idx] = new[idx]
        lengths[idx] += 1
        for i in idx:
            if collided[i]:
                status[i] = COLLIDED
            elif reached[i]:
                status[i] = REACHED_GOAL
            elif t + 1 >= horizon:
                status[i] = TIMED_OUT
            else:
                continue
            done_buf[i, t] = True
            active[i] = False
    return TrajectoryBatch(obs_buf, act_buf, logp_buf, rew_buf, val_buf, done_buf, speed_buf, lengths, status, poses, env_tasks)


def discounted_return(rewards, gamma: float) -> float:
    r = np.asarray(rewards, dtype=np.float64)
    return float(np.dot(gamma ** np.arange(len(r)), r))


def gae(rewards, values, dones, gamma: float, lam: float, last_value: float = 0.0):
    """Generalized advantage estimation on one sequence; returns ``(advantages, returns)``."""
    r = np.asarray(rewards, dtype=np.float64)[None, :]
    v = np.asarray(values, dtype=np.float64)[None, :]
    d = np.asarray(dones, dtype=np.bool_)[None, :]
    if not (r.shape == v.shape == d.shape):
        raise ValueError("rewards, values and dones must have equal length")
    adv, ret = kernels.gae(r, v, d, float(gamma), float(lam), np.array([float(last_value)]))
    return adv[0], ret[0]


def normalize(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / max(float(adv.std()), 1e-8)


def empirical_value(
    agent: ActorCritic,
    task: GridTask,
    n_rollouts: int,
    gamma: float,
    rng: np.random.Generator,
    horizon: int = DEFAULT_NAV.horizon,
    nav: NavConfig = DEFAULT_NAV,
    batch: TrajectoryBatch | None = None,
) -> float:
    """Monte-Carlo value: mean discounted return of ``n_rollouts`` stochastic episodes.

    When ``batch`` holds at least ``n_rollouts`` episodes on ``task`` (as a
    training batch collected from the same stream does), its leading episodes
    are reused instead of rolling out again.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    if batch is None or batch.n_envs < n_rollouts or any(t != task for t in batch.tasks[:n_rollouts]):
        batch = collect(agent, [task], n_rollouts, horizon, rng, nav)
    return float(np.mean(batch.discounted_returns(gamma)[:n_rollouts]))


# ----------------------------------------------------------------------- PPO


def ppo_loss_and_grads(agent: ActorCritic, obs, act, logp_old, adv, ret):
    """Clipped-surrogate loss (to minimize) and gradients for one minibatch."""
    cfg = agent.cfg
    n = len(obs)
    mean, c_pi = mlp_forward(agent.policy, obs)
    v, c_vf = mlp_forward(agent.value, obs)
    v = v[:, 0]
    logp = gaussian_logprob(mean, agent.log_std, act)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)
    surr = np.minimum(ratio * adv, clipped * adv)
    entropy = gaussian_entropy(agent.log_std)
    policy_loss = -float(surr.mean())
    value_loss = float(np.mean((v - ret) ** 2))
    loss = policy_loss + cfg.c_value * value_loss - cfg.c_entropy * entropy

    # d(-min)/d logp: only where the unclipped branch is the active minimum
    unclipped = ratio * adv <= clipped * adv
    g_logp = -(adv * ratio * unclipped) / n
    d_mean, d_ls = gaussian_logprob_grads(mean, agent.log_std, act)
    g_pi, _ = mlp_backward(agent.policy, c_pi, g_logp[:, None] * d_mean)
    in_range = (agent.log_std >= -5.0) & (agent.log_std <= 2.0)
    g_ls = (g_logp[:, None] * d_ls).sum(axis=0) - cfg.c_entropy * in_range
    g_vf, _ = mlp_backward(agent.value, c_vf, (2.0 * cfg.c_value * (v - ret) / n)[:, None])
    grads = {f"pi.{k}": g for k, g in g_pi.items()}
    grads["log_std"] = g_ls
    grads.update({f"vf.{k}": g for k, g in g_vf.items()})
    info = {
        "loss": loss,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip)),
        "approx_kl": float(np.mean(logp_old - logp)),
    }
    return loss, grads, info


def ppo_epochs(agent: ActorCritic, obs, act, logp_old, adv, ret, rng: np.random.Generator, minibatch: int | None = None):
    """Run ``cfg.epochs`` passes of shuffled minibatch Adam updates."""
    cfg = agent.cfg
    mb = minibatch or cfg.minibatch
    n = len(obs)
    adv = normalize(adv)
    params = agent.named_params()
    infos = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for i in range(0, n, mb):
            j = perm[i : i + mb]
            loss, grads, info = ppo_loss_and_grads(agent, obs[j], act[j], logp_old[j], adv[j], ret[j])
            if not math.isfinite(loss):
                log.warning("ppo: non-finite loss, minibatch skipped")
                continue
            if adam_step(agent.adam, params, grads):
                bump(agent.policy, agent.value)
            infos.append(info)
    if not infos:
        return {}
    return {k: float(np.mean([d[k] for d in infos])) for k in infos[0]}


def ppo_update(agent: ActorCritic, batch: TrajectoryBatch, rng: np.random.Generator) -> dict:
    """One PPO update from a rollout batch.  Mutates and returns stats."""
    cfg = agent.cfg
    mask = batch.mask
    if not mask.any():
        raise ValueError("empty trajectory batch")
    adv, ret = kernels.gae(batch.rewards, batch.values, batch.dones, cfg.gamma, cfg.lam, np.zeros(batch.n_envs))
    return ppo_epochs(agent, batch.obs[mask], batch.actions[mask], batch.logp[mask], adv[mask], ret[mask], rng)
