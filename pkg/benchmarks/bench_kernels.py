"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--rollouts]

Kernel timings call both implementation modules directly.  ``--rollouts``
also times a full rollout collection in two subprocesses, one per value of
``GACL_DISABLE_NUMBA``, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gacl.kernels import numba_impl, numpy_impl
from gacl.taskgen import make_reference_set

ROLLOUT_SNIPPET = """
import time
from gacl import kernels
from gacl.policyopt import collect, make_agent
from gacl.rng import stream
from gacl.taskgen import make_reference_set
refs = make_reference_set(3, 16)
agent = make_agent(rng=stream(0, "init"))
collect(agent, refs.tasks, 16, 8, stream(0, "warm"))
t = time.perf_counter()
for i in range(5):
    collect(agent, refs.tasks, 16, 128, stream(i, "bench"))
print(kernels.BACKEND, (time.perf_counter() - t) / 5)
"""


def cases(n_envs=16):
    refs = make_reference_set(3, n_envs)
    grids = np.stack([t.occupancy for t in refs.tasks])
    rng = np.random.default_rng(0)
    poses = np.column_stack([rng.uniform(1, 15, n_envs), rng.uniform(1, 15, n_envs), rng.uniform(-np.pi, np.pi, n_envs)])
    grid = grids[0]
    T = 128
    rewards = rng.normal(size=(n_envs, T))
    values = rng.normal(size=(n_envs, T))
    dones = np.zeros((n_envs, T), dtype=bool)
    dones[:, -1] = True
    last = np.zeros(n_envs)
    fov = 1.5 * np.pi
    return {
        "raycast": lambda m: m.raycast(grids, poses, 16, fov, 8.0),
        "collides": lambda m: m.collides(grids, poses[:, :2], 0.4),
        "bfs_distances": lambda m: m.bfs_distances(grid, 2, 2),
        "edt": lambda m: m.edt(grid),
        "ca_smooth": lambda m: m.ca_smooth(grid, 2),
        "gae": lambda m: m.gae(rewards, values, dones, 0.99, 0.95, last),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, atol=1e-9)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--rollouts", action="store_true", help="also time end-to-end rollout collection")
    args = ap.parse_args()

    print(f"{'kernel':<15}{'numba us':>12}{'numpy us':>12}{'speedup':>10}  agree")
    for name, fn in cases().items():
        fn(numba_impl)  # compile
        agree = same(fn(numba_impl), fn(numpy_impl))
        t_nb = min(timeit.repeat(lambda: fn(numba_impl), number=10, repeat=args.repeat)) / 10
        t_np = min(timeit.repeat(lambda: fn(numpy_impl), number=10, repeat=args.repeat)) / 10
        print(f"{name:<15}{t_nb * 1e6:>12.1f}{t_np * 1e6:>12.1f}{t_np / t_nb:>10.1f}  {agree}")

    if args.rollouts:
        for flag in ("0", "1"):
            env = {**os.environ, "GACL_DISABLE_NUMBA": flag}
            out = subprocess.run([sys.executable, "-c", ROLLOUT_SNIPPET], env=env, capture_output=True, text=True, check=True)
            backend, secs = out.stdout.split()
            print(f"collect 16 envs x 128 steps [{backend}]: {float(secs) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
