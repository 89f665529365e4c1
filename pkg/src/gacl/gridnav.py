"""Constrained 2D navigation environment.

Unicycle robot on an occupancy grid with a fan of lidar rays.  Coordinates are
continuous cell units: cell ``(row, col)`` spans ``[col, col+1) x [row, row+1)``
so ``occupancy[int(y), int(x)]`` is the cell under a point.

The scalar API (``reset``/``step``/``observe``) is a thin wrapper over the
batched functions (``advance``/``observe_batch``) that rollouts use, so both
paths share one implementation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels

RUNNING = "running"
REACHED_GOAL = "reached_goal"
COLLIDED = "collided"
TIMED_OUT = "timed_out"
TERMINAL_STATUSES = (REACHED_GOAL, COLLIDED, TIMED_OUT)

MAP_MAGIC = "GACLMAP v1"
MAX_SIDE = 64


class InvalidTaskError(ValueError):
    pass


class EpisodeFinishedError(RuntimeError):
    pass


@dataclass(frozen=True)
class NavConfig:
    n_rays: int = 16
    fov: float = 1.5 * math.pi
    r_max: float = 8.0
    dt: float = 0.1
    v_max: float = 2.0
    w_max: float = math.pi
    radius: float = 0.4
    goal_radius: float = 0.5
    horizon: int = 128
    c_progress: float = 1.0
    c_step: float = 0.01
    c_goal: float = 10.0
    c_collision: float = 10.0

    @property
    def obs_dim(self) -> int:
        # pose(2) + heading(2) + rays + goal distance(1) + goal bearing(2)
        return self.n_rays + 7


DEFAULT_NAV = NavConfig()


@dataclass
class GridTask:
    width: int
    height: int
    occupancy: np.ndarray  # (height, width) bool, True = obstacle
    start: tuple[float, float, float]
    goal: tuple[float, float]

    def __post_init__(self):
        self.occupancy = np.ascontiguousarray(self.occupancy, dtype=bool)
        self.start = tuple(float(v) for v in self.start)
        self.goal = tuple(float(v) for v in self.goal)

    @property
    def start_cell(self) -> tuple[int, int]:
        return int(math.floor(self.start[1])), int(math.floor(self.start[0]))

    @property
    def goal_cell(self) -> tuple[int, int]:
        return int(math.floor(self.goal[1])), int(math.floor(self.goal[0]))

    def problems(self) -> list[str]:
        """Invariant violations, empty when the task is valid."""
        out = []
        if not (0 < self.width <= MAX_SIDE and 0 < self.height <= MAX_SIDE):
            return [f"size {self.width}x{self.height} outside (0, {MAX_SIDE}]"]
        if self.occupancy.shape != (self.height, self.width):
            return [f"occupancy shape {self.occupancy.shape} != ({self.height}, {self.width})"]
        occ = self.occupancy
        if not (occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()):
            out.append("border cells not all occupied")
        for name, (r, c) in (("start", self.start_cell), ("goal", self.goal_cell)):
            if not (1 <= r < self.height - 1 and 1 <= c < self.width - 1):
                out.append(f"{name} cell {(r, c)} not strictly inside the border")
                continue
            if occ[r - 1 : r + 2, c - 1 : c + 2].any():
                out.append(f"{name} cell {(r, c)} or its 8-neighborhood is occupied")
        if not out:
            dist = kernels.bfs_distances(occ, *self.start_cell)
            if dist[self.goal_cell] < 0:
                out.append("no 4-connected path from start cell to goal cell")
        return out

    def check(self) -> "GridTask":
        problems = self.problems()
        if problems:
            raise InvalidTaskError("; ".join(problems))
        return self

    def copy(self) -> "GridTask":
        return replace(self, occupancy=self.occupancy.copy())

    def __eq__(self, other):
        if not isinstance(other, GridTask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.start == other.start
            and self.goal == other.goal
            and np.array_equal(self.occupancy, other.occupancy)
        )


@dataclass
class EnvState:
    task: GridTask
    pose: tuple[float, float, float]
    steps_elapsed: int = 0
    cumulative_reward: float = 0.0
    status: str = RUNNING
    cfg: NavConfig = field(default=DEFAULT_NAV, repr=False)


# ---------------------------------------------------------------- batched core


def clip_actions(actions: np.ndarray, cfg: NavConfig = DEFAULT_NAV) -> np.ndarray:
    out = np.empty_like(actions, dtype=np.float64)
    out[:, 0] = np.clip(actions[:, 0], 0.0, cfg.v_max)
    out[:, 1] = np.clip(actions[:, 1], -cfg.w_max, cfg.w_max)
    return out


def advance(grids, poses, goals, actions, cfg: NavConfig = DEFAULT_NAV):
    """One unicycle step for a batch.

    ``actions`` must already be clipped.  Returns ``(new_poses, reward,
    collided, reached)``; collision takes precedence over reaching the goal.
    """
    v = actions[:, 0]
    w = actions[:, 1]
    th = poses[:, 2]
    new = np.empty_like(poses)
    new[:, 0] = poses[:, 0] + v * np.cos(th) * cfg.dt
    new[:, 1] = poses[:, 1] + v * np.sin(th) * cfg.dt
    new[:, 2] = th + w * cfg.dt
    d_prev = np.hypot(goals[:, 0] - poses[:, 0], goals[:, 1] - poses[:, 1])
    d_new = np.hypot(goals[:, 0] - new[:, 0], goals[:, 1] - new[:, 1])
    collided = kernels.collides(grids, np.ascontiguousarray(new[:, :2]), cfg.radius)
    reached = (d_new < cfg.goal_radius) & ~collided
    reward = (
        cfg.c_progress * (d_prev - d_new)
        - cfg.c_step
        + cfg.c_goal * reached
        - cfg.c_collision * collided
    )
    return new, reward, collided, reached


def observe_batch(grids, poses, goals, sizes, cfg: NavConfig = DEFAULT_NAV) -> np.ndarray:
    """Observations for a batch; ``sizes`` is (n, 2) of (width, height)."""
    n = poses.shape[0]
    rays = kernels.raycast(grids, np.ascontiguousarray(poses), cfg.n_rays, cfg.fov, cfg.r_max)
    gx = goals[:, 0] - poses[:, 0]
    gy = goals[:, 1] - poses[:, 1]
    diag = np.hypot(sizes[:, 0], sizes[:, 1])
    bearing = np.arctan2(gy, gx) - poses[:, 2]
    obs = np.empty((n, cfg.obs_dim))
    obs[:, 0] = poses[:, 0] / sizes[:, 0]
    obs[:, 1] = poses[:, 1] / sizes[:, 1]
    obs[:, 2] = np.sin(poses[:, 2])
    obs[:, 3] = np.cos(poses[:, 2])
    obs[:, 4 : 4 + cfg.n_rays] = rays
    obs[:, 4 + cfg.n_rays] = np.minimum(np.hypot(gx, gy) / diag, 1.0)
    obs[:, 5 + cfg.n_rays] = np.sin(bearing)
    obs[:, 6 + cfg.n_rays] = np.cos(bearing)
    return obs


def stack_tasks(tasks: list[GridTask]):
    """Batch arrays ``(grids, goals, sizes)`` for tasks sharing one map size."""
    grids = np.stack([t.occupancy for t in tasks])
    goals = np.array([t.goal for t in tasks], dtype=np.float64)
    sizes = np.array([(t.width, t.height) for t in tasks], dtype=np.float64)
    return grids, goals, sizes


# ------------------------------------------------------------------ scalar API


def reset(task: GridTask, cfg: NavConfig = DEFAULT_NAV) -> EnvState:
    task.check()
    return EnvState(task=task, pose=task.start, cfg=cfg)


def observe(state: EnvState) -> np.ndarray:
    grids, goals, sizes = stack_tasks([state.task])
    return observe_batch(grids, np.array([state.pose]), goals, sizes, state.cfg)[0]


def step(state: EnvState, action) -> tuple[EnvState, np.ndarray, float, bool]:
    if state.status != RUNNING:
        raise EpisodeFinishedError(f"step called on finished episode (status {state.status})")
    cfg = state.cfg
    grids, goals, sizes = stack_tasks([state.task])
    act = clip_actions(np.asarray(action, dtype=np.float64).reshape(1, 2), cfg)
    new, reward, collided, reached = advance(grids, np.array([state.pose]), goals, act, cfg)
    steps = state.steps_elapsed + 1
    if collided[0]:
        status = COLLIDED
    elif reached[0]:
        status = REACHED_GOAL
    elif steps >= cfg.horizon:
        status = TIMED_OUT
    else:
        status = RUNNING
    r = float(reward[0])
    nxt = EnvState(
        task=state.task,
        pose=tuple(float(v) for v in new[0]),
        steps_elapsed=steps,
        cumulative_reward=state.cumulative_reward + r,
        status=status,
        cfg=cfg,
    )
    obs = observe_batch(grids, new, goals, sizes, cfg)[0]
    return nxt, obs, r, status != RUNNING


def raycast(task: GridTask, pose, n_rays: int = 16, fov: float = 1.5 * math.pi, r_max: float = 8.0) -> np.ndarray:
    """Normalized lidar distances from ``pose`` (all zeros inside an obstacle)."""
    poses = np.asarray(pose, dtype=np.float64).reshape(1, 3)
    return kernels.raycast(task.occupancy[None], poses, n_rays, fov, r_max)[0]


# -------------------------------------------------------------- GACLMAP v1 text


def format_map(task: GridTask) -> str:
    """Serialize; the first grid row written is row 0 (y in [0, 1))."""
    lines = [MAP_MAGIC, f"{task.width} {task.height}"]
    for row in task.occupancy:
        lines.append("".join("#" if v else "." for v in row))
    sx, sy, sth = task.start
    gx, gy = task.goal
    lines.append(f"S {sx!r} {sy!r} {sth!r}")
    lines.append(f"G {gx!r} {gy!r}")
    return "\n".join(lines) + "\n"


def parse_map(text: str) -> GridTask:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != MAP_MAGIC:
        raise ValueError(f"not a {MAP_MAGIC} file")
    try:
        width, height = (int(v) for v in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise ValueError("bad size line") from exc
    rows = lines[2 : 2 + height]
    if len(rows) != height or any(len(r) != width or set(r) - {".", "#"} for r in rows):
        raise ValueError("grid rows do not match declared size")
    occ = np.array([[ch == "#" for ch in r] for r in rows], dtype=bool)
    rest = lines[2 + height :]
    if len(rest) != 2:
        raise ValueError("expected S and G lines after the grid")
    s = rest[0].split()
    g = rest[1].split()
    if len(s) != 4 or s[0] != "S" or len(g) != 3 or g[0] != "G":
        raise ValueError("malformed S/G lines")
    return GridTask(width, height, occ, tuple(float(v) for v in s[1:]), tuple(float(v) for v in g[1:]))


def save_map(task: GridTask, path) -> None:
    Path(path).write_text(format_map(task), encoding="utf-8", newline="\n")


def load_map(path) -> GridTask:
    return parse_map(Path(path).read_text(encoding="utf-8"))
