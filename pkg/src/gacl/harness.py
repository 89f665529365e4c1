"""Training loop for the curriculum arms, baselines and ablations; evaluation; CSV export.

A run directory holds::

    config.yaml      every RunConfig field, as used
    metrics.jsonl    one JSON object per line; ``record`` is epoch | regret | eval
    history.jsonl    teacher-history record appended each epoch (teacher arms)
    tasks.jsonl      the task presented each epoch, in GACLMAP v1 text
    timing.jsonl     per-epoch phase timestamps (ns, monotonic); not deterministic
    checkpoints/     student, antagonist, teacher, vae (GACLCKPT v1)
    eval_final.json  held-out evaluation of the final student
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import gridnav, taskgen
from .gridnav import REACHED_GOAL, GridTask, NavConfig
from .policyopt import ActorCritic, PPOConfig, TrajectoryBatch, collect, empirical_value, ppo_update
from .rng import Streams, stream
from .taskgen import ReferenceSet, difficulty
from .taskvae import VaeParams, encode, load_vae, pretrain, save_vae
from .teacher import (
    REFERENCE,
    SYNTHETIC,
    Selection,
    TeacherConfig,
    TeacherState,
    TeacherStep,
    encode_state,
    make_teacher,
    regret,
    save_teacher,
    select_task,
    teacher_update,
)

log = logging.getLogger(__name__)

TEACHER_ARMS = ("gacl", "stateless_teacher", "ablate_grounding", "ablate_task", "ablate_performance")
BASELINE_ARMS = ("base_rl", "manual_cl", "stateless_teacher")
ABLATION_ARMS = ("ablate_grounding", "ablate_task", "ablate_performance")
ARMS = ("gacl", "base_rl", "manual_cl", "stateless_teacher", *ABLATION_ARMS)

METRIC_FIELDS = [
    "epoch",
    "arm",
    "source",
    "difficulty",
    "success_rate",
    "progress",
    "avg_steps",
    "avg_reward",
    "avg_speed",
    "antagonist_value",
    "regret",
    "wall_clock",
]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    arm: str = "gacl"
    # curriculum
    epsilon: float = 0.3
    history: int = 8
    latent_dim: int = 32
    teacher_window: int = 16
    # RL
    gamma_student: float = 0.99
    gamma_teacher: float = 0.99
    lr_student: float = 3e-4
    lr_teacher: float = 1e-4
    ppo_epochs_student: int = 5
    ppo_epochs_teacher: int = 10
    clip: float = 0.2
    c_value: float = 0.5
    c_entropy: float = 0.01
    gae_lambda: float = 0.95
    minibatch: int = 256
    n_envs: int = 16
    horizon: int = 128
    value_rollouts: int = 8
    epochs: int = 5000
    # environment
    map_width: int = 16
    map_height: int = 16
    c_progress: float = 1.0
    c_step: float = 0.01
    c_goal: float = 10.0
    c_collision: float = 10.0
    alpha: float = 1.0
    beta: float = 1.0
    # reference tasks
    refs_manifest: str = ""
    refs_seed: int = 1234
    n_refs: int = 200
    fill_min: float = 0.2
    fill_max: float = 0.45
    smooth_iters: int = 2
    heldout_seed: int = 99991
    n_heldout: int = 50
    # VAE
    vae_checkpoint: str = ""
    vae_epochs: int = 2000
    vae_batch: int = 32
    vae_lr: float = 3e-4
    vae_kl_weight: float = 0.5
    # evaluation / stopping
    eval_every: int = 50
    eval_episodes: int = 4
    eval_stochastic: bool = False
    early_stop: bool = True
    patience: int = 200
    min_delta: float = 0.005
    log_wall_clock: bool = False

    def validate(self) -> "RunConfig":
        if self.arm not in ARMS:
            raise ConfigError(f"unknown arm {self.arm!r}; expected one of {', '.join(ARMS)}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must be in [0, 1]")
        if self.history < 1 or self.n_envs < 1 or self.horizon < 1 or self.epochs < 0:
            raise ConfigError("history, n_envs, horizon must be >= 1 and epochs >= 0")
        if self.value_rollouts < 1 or self.teacher_window < 1:
            raise ConfigError("value_rollouts and teacher_window must be >= 1")
        if self.epsilon > 0 and self.n_refs < 1 and not self.refs_manifest:
            raise ConfigError("epsilon > 0 needs a non-empty reference set")
        return self

    @property
    def nav(self) -> NavConfig:
        return NavConfig(
            horizon=self.horizon,
            c_progress=self.c_progress,
            c_step=self.c_step,
            c_goal=self.c_goal,
            c_collision=self.c_collision,
        )

    @property
    def student_ppo(self) -> PPOConfig:
        return PPOConfig(
            lr=self.lr_student,
            epochs=self.ppo_epochs_student,
            clip=self.clip,
            c_value=self.c_value,
            c_entropy=self.c_entropy,
            gamma=self.gamma_student,
            lam=self.gae_lambda,
            minibatch=self.minibatch,
        )

    @property
    def teacher_cfg(self) -> TeacherConfig:
        ppo = PPOConfig(
            lr=self.lr_teacher,
            epochs=self.ppo_epochs_teacher,
            clip=self.clip,
            c_value=self.c_value,
            c_entropy=self.c_entropy,
            gamma=self.gamma_teacher,
            lam=self.gae_lambda,
            hidden=(128, 128),
        )
        eps = 0.0 if self.arm == "ablate_grounding" else self.epsilon
        return TeacherConfig(self.history, self.latent_dim, eps, 4.0, self.teacher_window, ppo)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then keys from a YAML file, then explicit overrides."""
    data = {}
    if path:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping of keys to values")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name: f for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig()
    for k, v in data.items():
        default = getattr(cfg, k)
        if isinstance(default, bool):
            v = bool(v)
        elif isinstance(default, int):
            v = int(v)
        elif isinstance(default, float):
            v = float(v)
        else:
            v = str(v)
        setattr(cfg, k, v)
    return cfg.validate()


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


# ------------------------------------------------------------------ evaluation


def geodesic_field(task: GridTask) -> np.ndarray:
    from . import kernels

    return kernels.bfs_distances(task.occupancy, *task.goal_cell)


def geodesic_progress(task: GridTask, pose, status: str, field_: np.ndarray | None = None) -> float:
    """Fraction of the initial BFS distance to the goal covered, clamped to [0, 1]."""
    if status == REACHED_GOAL:
        return 1.0
    dist = geodesic_field(task) if field_ is None else field_
    d0 = dist[task.start_cell]
    r, c = int(np.floor(pose[1])), int(np.floor(pose[0]))
    if d0 <= 0:
        return 1.0
    if not (0 <= r < task.height and 0 <= c < task.width) or dist[r, c] < 0:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 - dist[r, c] / d0)))


def batch_stats(batch: TrajectoryBatch, fields: dict | None = None) -> dict:
    """Per-episode success, progress, steps, return and mean speed."""
    fields = {} if fields is None else fields
    success, progress, steps, speed, speed_sum = [], [], [], [], []
    for i, task in enumerate(batch.tasks):
        key = (task.occupancy.shape, task.occupancy.tobytes(), task.goal_cell)
        if key not in fields:
            fields[key] = geodesic_field(task)
        ok = batch.status[i] == REACHED_GOAL
        success.append(float(ok))
        progress.append(geodesic_progress(task, batch.final_poses[i], batch.status[i], fields[key]))
        steps.append(float(batch.lengths[i]))
        total = float(batch.speeds[i, : batch.lengths[i]].sum())
        speed_sum.append(total)
        speed.append(total / batch.lengths[i] if batch.lengths[i] else 0.0)
    return {
        "success": np.array(success),
        "progress": np.array(progress),
        "steps": np.array(steps),
        "reward": batch.episode_returns.astype(np.float64),
        "speed": np.array(speed),
        "speed_sum": np.array(speed_sum),
    }


def pooled_speed(stats: dict) -> float:
    """Mean speed over every step of every episode."""
    n = stats["steps"].sum()
    return float(stats["speed_sum"].sum() / n) if n else 0.0


@dataclass
class EvalReport:
    n_episodes: int
    success_mean: float
    success_std: float
    progress_mean: float
    progress_std: float
    steps_mean: float | None  # successful episodes only
    steps_std: float | None
    reward_mean: float
    reward_std: float
    speed_mean: float
    speed_std: float  # spread of per-episode mean speeds

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _report(stats: dict) -> EvalReport:
    ok = stats["success"] > 0.5
    steps = stats["steps"][ok]
    return EvalReport(
        n_episodes=int(len(stats["success"])),
        success_mean=float(stats["success"].mean()),
        success_std=float(stats["success"].std()),
        progress_mean=float(stats["progress"].mean()),
        progress_std=float(stats["progress"].std()),
        steps_mean=float(steps.mean()) if len(steps) else None,
        steps_std=float(steps.std()) if len(steps) else None,
        reward_mean=float(stats["reward"].mean()),
        reward_std=float(stats["reward"].std()),
        speed_mean=pooled_speed(stats),
        speed_std=float(stats["speed"].std()),
    )


def evaluate(
    agent: ActorCritic,
    suite: ReferenceSet | list[GridTask],
    episodes_per_task: int = 4,
    seed: int = 0,
    nav: NavConfig = gridnav.DEFAULT_NAV,
    deterministic: bool = True,
) -> EvalReport:
    """Held-out evaluation; deterministic mode acts with the policy mean."""
    tasks = suite.tasks if isinstance(suite, ReferenceSet) else list(suite)
    if not tasks:
        raise ValueError("evaluation suite is empty")
    envs = [t for t in tasks for _ in range(episodes_per_task)]
    batch = collect(agent, envs, len(envs), nav.horizon, stream(seed, "eval"), nav, deterministic=deterministic)
    return _report(batch_stats(batch))


# ------------------------------------------------------------------- the loop


def reference_tasks(cfg: RunConfig) -> ReferenceSet:
    if cfg.refs_manifest:
        return taskgen.read_reference_set(cfg.refs_manifest)
    return taskgen.make_reference_set(
        cfg.refs_seed, cfg.n_refs, cfg.map_width, cfg.map_height, (cfg.fill_min, cfg.fill_max), cfg.smooth_iters
    )


def heldout_suite(cfg: RunConfig) -> ReferenceSet:
    """Evaluation maps from a generator seed disjoint from the training references."""
    if cfg.heldout_seed == cfg.refs_seed:
        raise ConfigError("heldout_seed must differ from refs_seed")
    return taskgen.make_reference_set(
        cfg.heldout_seed, cfg.n_heldout, cfg.map_width, cfg.map_height, (cfg.fill_min, cfg.fill_max), cfg.smooth_iters
    )


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=False)


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


class _Run:
    def __init__(self, cfg: RunConfig, out_dir):
        self.cfg = cfg.validate()
        self.out = Path(out_dir)
        self.ckpt = self.out / "checkpoints"
        self.ckpt.mkdir(parents=True, exist_ok=True)
        self.streams = Streams(cfg.seed)
        self.nav = cfg.nav
        self.uses_teacher = cfg.arm in TEACHER_ARMS

    # -- setup
    def load_refs(self) -> ReferenceSet:
        return reference_tasks(self.cfg)

    def load_heldout(self) -> ReferenceSet:
        return heldout_suite(self.cfg)

    def load_vae(self, refs: ReferenceSet) -> VaeParams:
        cfg = self.cfg
        if cfg.vae_checkpoint:
            path = Path(cfg.vae_checkpoint)
            if not path.exists():
                raise FileNotFoundError(f"VAE checkpoint {path} not found; run `gacl pretrain-vae` first or leave vae_checkpoint empty to pretrain inline")
            return load_vae(path)
        vae, curve = pretrain(refs, cfg.vae_epochs, cfg.vae_batch, cfg.vae_lr, cfg.vae_kl_weight, seed=cfg.seed, latent_dim=cfg.latent_dim)
        write_curve(curve, self.out / "vae_curve.csv")
        return vae

    def setup(self):
        cfg = self.cfg
        save_config(cfg, self.out / "config.yaml")
        self.refs = self.load_refs()
        self.heldout = self.load_heldout()
        self.ref_difficulty = np.array([difficulty(t, cfg.alpha, cfg.beta).value for t in self.refs.tasks])
        self.student = ActorCritic.create(self.nav.obs_dim, 2, cfg.student_ppo, self.streams.fresh("init", "student"))
        self.antagonist = ActorCritic.create(self.nav.obs_dim, 2, cfg.student_ppo, self.streams.fresh("init", "antagonist"))
        self.vae = None
        if self.uses_teacher:
            self.vae = self.load_vae(self.refs)
            self.ref_latents = encode(self.vae, np.stack([t.occupancy for t in self.refs.tasks]))[0]
            self.tcfg = cfg.teacher_cfg
            self.teacher = make_teacher(self.tcfg, self.streams.fresh("init", "teacher"))
            self.tstate = TeacherState(self.tcfg.history, self.tcfg.latent_dim)
            self.tbuffer: deque[TeacherStep] = deque(maxlen=self.tcfg.window)
            save_vae(self.vae, self.ckpt / "vae.ckpt")
        sorted_idx = np.argsort(self.ref_difficulty, kind="stable")
        self.bins = np.array_split(sorted_idx, 5)
        self.save_checkpoints()
        self.files = {name: (self.out / f"{name}.jsonl").open("w", encoding="utf-8", newline="\n") for name in ("metrics", "history", "tasks", "timing")}

    def save_checkpoints(self):
        self.student.save(self.ckpt / "student.ckpt")
        self.antagonist.save(self.ckpt / "antagonist.ckpt")
        if self.uses_teacher:
            save_teacher(self.teacher, self.tstate, self.ckpt / "teacher.ckpt")

    def write(self, name: str, obj: dict):
        self.files[name].write(_json(obj) + "\n")

    # -- per-epoch pieces
    def update_teacher(self, epoch: int):
        """Clipped update on the sliding window of recent synthetic steps.

        Log-probs stay those of the sampling policy; values are refreshed from
        the current critic so advantages reflect what it now predicts.
        """
        window = list(self.tbuffer)
        values = self.teacher.value(np.stack([s.obs for s in window]))[:, 0]
        steps = [TeacherStep(s.obs, s.action, s.logp, float(v), s.reward) for s, v in zip(window, values)]
        boot = float(self.teacher.value(self.teacher_obs())[0])
        teacher_update(self.teacher, steps, self.streams.fresh("teacher", "update", epoch), bootstrap=boot)

    def teacher_obs(self) -> np.ndarray:
        if self.cfg.arm == "stateless_teacher":
            return np.zeros(self.tcfg.state_dim)
        return encode_state(self.tstate)

    def choose(self, epoch: int) -> Selection:
        cfg = self.cfg
        if self.uses_teacher:
            return select_task(
                self.tcfg.epsilon,
                self.refs,
                self.teacher,
                self.tstate,
                self.streams.get("select"),
                self.vae,
                self.ref_latents,
                teacher_rng=self.streams.get("teacher", "propose"),
                obs=self.teacher_obs(),
                clamp=self.tcfg.latent_clamp,
            )
        rng = self.streams.get("baseline", "tasks")
        if cfg.arm == "manual_cl":
            b = min(4, epoch * 5 // max(cfg.epochs, 1))
            pool = self.bins[b]
            i = int(pool[rng.integers(len(pool))])
        else:
            i = int(rng.integers(len(self.refs)))
        return Selection(self.refs.tasks[i], REFERENCE, np.zeros(0), i)

    def history_entry(self, sel: Selection, student_reward: float):
        latent, reward = sel.latent, student_reward
        if self.cfg.arm == "ablate_task":
            latent = self.streams.get("ablation", "xi").standard_normal(self.tcfg.latent_dim)
        elif self.cfg.arm == "ablate_performance":
            reward = float(self.streams.get("ablation", "eta").uniform(0.0, 1.0))
        return latent, reward

    def run(self):
        cfg = self.cfg
        self.setup()
        fields_cache: dict = {}
        best, since_best = -np.inf, 0
        t_start = time.perf_counter()
        last_epoch = -1
        try:
            for epoch in range(cfg.epochs):
                stamps = {"epoch": epoch, "select": time.perf_counter_ns()}
                sel = self.choose(epoch)
                task = sel.task
                task_id = f"ref:{sel.ref_index}" if sel.source == REFERENCE else f"syn:{epoch}"
                stamps["student_collect"] = time.perf_counter_ns()
                s_rng = ("student", "collect", epoch)
                sb = collect(self.student, [task], cfg.n_envs, cfg.horizon, self.streams.fresh(*s_rng), self.nav)
                student_reward = float(sb.episode_returns.mean())
                v_a = v_s = reg = None
                if self.uses_teacher:
                    stamps["antagonist_collect"] = time.perf_counter_ns()
                    a_rng = ("antagonist", "collect", epoch)
                    ab = collect(self.antagonist, [task], cfg.n_envs, cfg.horizon, self.streams.fresh(*a_rng), self.nav)
                    stamps["regret"] = time.perf_counter_ns()
                    v_s = empirical_value(self.student, task, cfg.value_rollouts, cfg.gamma_student, self.streams.fresh(*s_rng), cfg.horizon, self.nav, batch=sb)
                    v_a = empirical_value(self.antagonist, task, cfg.value_rollouts, cfg.gamma_student, self.streams.fresh(*a_rng), cfg.horizon, self.nav, batch=ab)
                    reg = regret(v_a, v_s)
                    self.write("metrics", {"record": "regret", "epoch": epoch, "task_id": task_id, "v_antagonist": v_a, "v_student": v_s, "regret": reg, "source": sel.source})
                    stamps["history"] = time.perf_counter_ns()
                    latent, hreward = self.history_entry(sel, student_reward)
                    self.tstate.append(latent, hreward)
                    self.write("history", {"epoch": epoch, "source": sel.source, "latent": [float(v) for v in latent], "reward": float(hreward)})
                stamps["updates"] = time.perf_counter_ns()
                ppo_update(self.student, sb, self.streams.fresh("student", "update", epoch))
                if self.uses_teacher:
                    ppo_update(self.antagonist, ab, self.streams.fresh("antagonist", "update", epoch))
                    if sel.source == SYNTHETIC:
                        p = sel.proposal
                        self.tbuffer.append(TeacherStep(p.obs, p.raw, p.logp, p.value, reg))
                        if len(self.tbuffer) == self.tcfg.window:
                            self.update_teacher(epoch)
                stamps["done"] = time.perf_counter_ns()

                st = batch_stats(sb, fields_cache)
                ok = st["success"] > 0.5
                record = {
                    "record": "epoch",
                    "epoch": epoch,
                    "arm": cfg.arm,
                    "source": sel.source,
                    "difficulty": difficulty(task, cfg.alpha, cfg.beta).value,
                    "success_rate": float(st["success"].mean()),
                    "progress": float(st["progress"].mean()),
                    "avg_steps": float(st["steps"][ok].mean()) if ok.any() else None,
                    "avg_reward": float(st["reward"].mean()),
                    "avg_speed": pooled_speed(st),
                    "antagonist_value": v_a,
                    "regret": reg,
                    "wall_clock": time.perf_counter() - t_start if cfg.log_wall_clock else None,
                }
                self.write("metrics", record)
                self.write("tasks", {"epoch": epoch, "task_id": task_id, "map": gridnav.format_map(task)})
                self.write("timing", stamps)
                if len(fields_cache) > 512:
                    fields_cache.clear()
                last_epoch = epoch

                if cfg.eval_every > 0 and (epoch + 1) % cfg.eval_every == 0:
                    rep = self.evaluate()
                    self.write("metrics", {"record": "eval", "epoch": epoch, "arm": cfg.arm, **rep.to_dict()})
                    if rep.success_mean > best + cfg.min_delta:
                        best, since_best = rep.success_mean, 0
                    else:
                        since_best += cfg.eval_every
                    if cfg.early_stop and since_best >= cfg.patience:
                        log.info("early stop at epoch %d (best eval success %.3f)", epoch, best)
                        break
            final = self.evaluate()
            (self.out / "eval_final.json").write_text(_json({"epoch": last_epoch, **final.to_dict()}) + "\n")
            self.save_checkpoints()
        finally:
            for fh in self.files.values():
                fh.close()
        return self.out

    def evaluate(self) -> EvalReport:
        return evaluate(self.student, self.heldout, self.cfg.eval_episodes, self.cfg.seed, self.nav, deterministic=not self.cfg.eval_stochastic)


def run_gacl(cfg: RunConfig, out_dir) -> Path:
    if cfg.arm != "gacl":
        raise ConfigError(f"run_gacl expects arm 'gacl', got {cfg.arm!r}")
    return _Run(cfg, out_dir).run()


def run_baseline(cfg: RunConfig, out_dir) -> Path:
    if cfg.arm not in BASELINE_ARMS:
        raise ConfigError(f"run_baseline expects one of {BASELINE_ARMS}, got {cfg.arm!r}")
    return _Run(cfg, out_dir).run()


def run_ablation(cfg: RunConfig, out_dir) -> Path:
    if cfg.arm not in ABLATION_ARMS:
        raise ConfigError(f"run_ablation expects one of {ABLATION_ARMS}, got {cfg.arm!r}")
    return _Run(cfg, out_dir).run()


def train(cfg: RunConfig, out_dir) -> Path:
    if cfg.arm == "gacl":
        return run_gacl(cfg, out_dir)
    if cfg.arm in ABLATION_ARMS:
        return run_ablation(cfg, out_dir)
    return run_baseline(cfg, out_dir)


def evaluate_run(run_dir, checkpoint: str = "student") -> EvalReport:
    """Re-evaluate a run directory's checkpoint on its held-out suite."""
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.yaml")
    heldout = heldout_suite(cfg)
    agent = ActorCritic.create(cfg.nav.obs_dim, 2, cfg.student_ppo, np.random.default_rng(0))
    agent.load(run_dir / "checkpoints" / f"{checkpoint}.ckpt")
    return evaluate(agent, heldout, cfg.eval_episodes, cfg.seed, cfg.nav, deterministic=not cfg.eval_stochastic)


def write_curve(curve: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(curve[0]), lineterminator="\n")
        w.writeheader()
        for row in curve:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


# ----------------------------------------------------------------- CSV export

COMPARISON_FIELDS = [
    "arm",
    "seed",
    "epoch",
    "source",
    "difficulty",
    "success_rate",
    "progress",
    "avg_steps",
    "avg_reward",
    "avg_speed",
    "antagonist_value",
    "regret",
    "eval_success",
    "eval_progress",
]
TREND_FIELDS = ["arm", "seed", "epoch", "difficulty", "difficulty_ma50"]


def read_metrics(run_dir) -> tuple[list[dict], int]:
    """Parsed metrics lines and the count of malformed lines skipped."""
    rows, bad = [], 0
    with (Path(run_dir) / "metrics.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict) or "record" not in obj:
                    raise ValueError
            except ValueError:
                bad += 1
                continue
            rows.append(obj)
    return rows, bad


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def export_csv(run_dirs, out_dir) -> tuple[Path, Path, int]:
    """Write ``comparison.csv`` and ``difficulty_trend.csv``; returns paths and skipped-line count."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comp_path, trend_path = out / "comparison.csv", out / "difficulty_trend.csv"
    skipped = 0
    with comp_path.open("w", newline="") as fc, trend_path.open("w", newline="") as ft:
        wc = csv.writer(fc, lineterminator="\n")
        wt = csv.writer(ft, lineterminator="\n")
        wc.writerow(COMPARISON_FIELDS)
        wt.writerow(TREND_FIELDS)
        for run_dir in run_dirs:
            rows, bad = read_metrics(run_dir)
            skipped += bad
            if bad:
                log.warning("%s: skipped %d malformed metrics lines", run_dir, bad)
            seed = load_config(Path(run_dir) / "config.yaml").seed
            evals = {r["epoch"]: r for r in rows if r["record"] == "eval"}
            epochs = [r for r in rows if r["record"] == "epoch"]
            diffs = []
            for r in epochs:
                ev = evals.get(r["epoch"], {})
                wc.writerow(
                    [r["arm"], seed]
                    + [_cell(r.get(k)) for k in COMPARISON_FIELDS[2:12]]
                    + [_cell(ev.get("success_mean")), _cell(ev.get("progress_mean"))]
                )
                diffs.append(r["difficulty"])
                ma = float(np.mean(diffs[-50:]))
                wt.writerow([r["arm"], seed, r["epoch"], _cell(r["difficulty"]), _cell(ma)])
    return comp_path, trend_path, skipped
