"""Reference-task generation, solvability repair and the navigation difficulty score."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .gridnav import GridTask, load_map, save_map
from .rng import stream

MANIFEST_FIELDS = ["name", "seed", "path_length", "clearance", "difficulty"]


class UnsolvableTaskError(ValueError):
    pass


def default_endpoints(width: int, height: int):
    """Fixed start pose and goal shared by every task of a given size."""
    return (2.5, 2.5, 0.0), (width - 2.5, height - 2.5)


def _cell(xy) -> tuple[int, int]:
    return int(np.floor(xy[1])), int(np.floor(xy[0]))


def force_border(grid: np.ndarray) -> np.ndarray:
    grid[0, :] = grid[-1, :] = True
    grid[:, 0] = grid[:, -1] = True
    return grid


def clear_neighborhood(grid: np.ndarray, cell: tuple[int, int]) -> np.ndarray:
    r, c = cell
    grid[max(r - 1, 1) : r + 2, max(c - 1, 1) : c + 2] = False
    force_border(grid)
    return grid


def repair(grid: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> np.ndarray:
    """Return a copy of ``grid`` in which goal is 4-reachable from start.

    Solvable grids come back unchanged.  Otherwise an L-shaped corridor is
    carved (along the start row to the goal column, then along the goal
    column) and both 8-neighborhoods are cleared.
    """
    out = np.array(grid, dtype=bool, copy=True)
    if kernels.bfs_distances(out, *start)[goal] >= 0:
        return out
    (sr, sc), (gr, gc) = start, goal
    out[sr, min(sc, gc) : max(sc, gc) + 1] = False
    out[min(sr, gr) : max(sr, gr) + 1, gc] = False
    clear_neighborhood(out, start)
    clear_neighborhood(out, goal)
    return out


def generate_reference(
    seed: int,
    width: int = 16,
    height: int = 16,
    fill_rate: float = 0.35,
    smooth_iters: int = 2,
) -> GridTask:
    """Cellular-automaton cave map with fixed endpoints; always solvable."""
    if not 0.0 <= fill_rate <= 1.0:
        raise ValueError(f"fill_rate must be in [0, 1], got {fill_rate}")
    rng = stream(seed, "taskgen", "fill")
    grid = rng.random((height, width)) < fill_rate
    grid = np.asarray(kernels.ca_smooth(grid, smooth_iters), dtype=bool)
    force_border(grid)
    start, goal = default_endpoints(width, height)
    clear_neighborhood(grid, _cell(start))
    clear_neighborhood(grid, _cell(goal))
    grid = repair(grid, _cell(start), _cell(goal))
    return GridTask(width, height, grid, start, goal)


@dataclass
class ShortestPath:
    cells: list[tuple[int, int]]
    length: int  # edges


def shortest_path(task: GridTask) -> ShortestPath | None:
    """4-connected BFS path from start cell to goal cell, ``None`` if unreachable."""
    dist = kernels.bfs_distances(task.occupancy, *task.start_cell)
    gr, gc = task.goal_cell
    if dist[gr, gc] < 0:
        return None
    cells = [(gr, gc)]
    r, c = gr, gc
    while dist[r, c] > 0:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < task.height and 0 <= nc < task.width and dist[nr, nc] == dist[r, c] - 1:
                r, c = nr, nc
                break
        cells.append((r, c))
    cells.reverse()
    return ShortestPath(cells, int(dist[gr, gc]))


def clearance(task: GridTask, path) -> float:
    """Minimum Euclidean distance from path cells to the nearest occupied cell center."""
    cells = path.cells if isinstance(path, ShortestPath) else list(path)
    if not cells:
        raise ValueError("clearance of an empty path")
    dt = kernels.edt(task.occupancy.astype(np.bool_))
    rows, cols = zip(*cells)
    return float(dt[list(rows), list(cols)].min())


@dataclass(frozen=True)
class DifficultyScore:
    value: float
    path_length: int
    clearance: float


def difficulty(task: GridTask, alpha: float = 1.0, beta: float = 1.0) -> DifficultyScore:
    path = shortest_path(task)
    if path is None:
        raise UnsolvableTaskError("difficulty of an unsolvable task")
    clr = clearance(task, path)
    return DifficultyScore(alpha * path.length - beta * clr, path.length, clr)


# --------------------------------------------------------------- reference sets


@dataclass
class ReferenceSet:
    tasks: list[GridTask]
    seed: int
    params: dict = field(default_factory=dict)
    task_seeds: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.tasks)


def make_reference_set(
    seed: int,
    n: int = 200,
    width: int = 16,
    height: int = 16,
    fill_range: tuple[float, float] = (0.2, 0.45),
    smooth_iters: int = 2,
) -> ReferenceSet:
    if n < 1:
        raise ValueError("reference set needs at least one task")
    rng = stream(seed, "taskgen", "refset")
    task_seeds = [int(s) for s in rng.integers(0, 2**62, size=n)]
    fills = rng.uniform(fill_range[0], fill_range[1], size=n)
    tasks = [generate_reference(s, width, height, float(f), smooth_iters) for s, f in zip(task_seeds, fills)]
    params = {
        "n": n,
        "width": width,
        "height": height,
        "fill_range": [float(fill_range[0]), float(fill_range[1])],
        "smooth_iters": smooth_iters,
    }
    return ReferenceSet(tasks, seed, params, task_seeds)


def write_reference_set(refs: ReferenceSet, out_dir, alpha: float = 1.0, beta: float = 1.0) -> Path:
    """Write one GACLMAP file per task plus ``manifest.csv``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for i, task in enumerate(refs.tasks):
            name = f"map_{i:04d}.txt"
            save_map(task, out / name)
            score = difficulty(task, alpha, beta)
            seed = refs.task_seeds[i] if refs.task_seeds else ""
            writer.writerow([name, seed, score.path_length, repr(score.clearance), repr(score.value)])
    (out / "refs.yaml").write_text(yaml.safe_dump({"seed": refs.seed, **refs.params}, sort_keys=True))
    return manifest


def read_reference_set(manifest) -> ReferenceSet:
    manifest = Path(manifest)
    tasks, seeds = [], []
    with manifest.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise ValueError(f"manifest header {reader.fieldnames} != {MANIFEST_FIELDS}")
        for row in reader:
            tasks.append(load_map(manifest.parent / row["name"]).check())
            seeds.append(int(row["seed"]) if row["seed"] else 0)
    if not tasks:
        raise ValueError(f"empty manifest {manifest}")
    side = manifest.parent / "refs.yaml"
    params = yaml.safe_load(side.read_text()) if side.exists() else {}
    return ReferenceSet(tasks, int(params.pop("seed", 0)), params, seeds)
