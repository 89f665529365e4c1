import math

import numpy as np
import pytest

from gacl import kernels
from gacl.kernels import numba_impl, numpy_impl

from oracles import brute_edt, brute_gae, dijkstra, ray_march


def raw_grid(seed, size=16, fill=0.35):
    rng = np.random.default_rng(seed)
    g = rng.random((size, size)) < fill
    g[0, :] = g[-1, :] = g[:, 0] = g[:, -1] = True
    return g


def test_backend_flag_selects_numba_by_default():
    assert kernels.BACKEND in ("numba", "numpy")


def test_raycast_matches_ray_march(backend):
    rng = np.random.default_rng(3)
    for seed in range(4):
        grid = raw_grid(seed)
        free = np.argwhere(~grid)
        for _ in range(5):
            r, c = free[rng.integers(len(free))]
            pose = np.array([[c + rng.random(), r + rng.random(), rng.uniform(-np.pi, np.pi)]])
            got = backend.raycast(grid[None], pose, 16, 1.5 * np.pi, 8.0)[0]
            fov = 1.5 * np.pi
            want = [ray_march(grid, pose[0, 0], pose[0, 1], pose[0, 2] - fov / 2 + k * fov / 15, 8.0) for k in range(16)]
            assert np.max(np.abs(got - want)) < 0.01


def test_raycast_backends_agree():
    rng = np.random.default_rng(0)
    grids = np.stack([raw_grid(s) for s in range(8)])
    poses = np.column_stack([rng.uniform(1, 15, 8), rng.uniform(1, 15, 8), rng.uniform(-4, 4, 8)])
    a = numba_impl.raycast(grids, poses, 16, 1.5 * np.pi, 8.0)
    b = numpy_impl.raycast(grids, poses, 16, 1.5 * np.pi, 8.0)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_raycast_inside_obstacle_is_zero(backend):
    grid = raw_grid(1)
    grid[5, 5] = True
    out = backend.raycast(grid[None], np.array([[5.5, 5.5, 0.0]]), 16, 1.5 * np.pi, 8.0)
    assert np.all(out == 0.0)


def test_collides_backends_agree():
    rng = np.random.default_rng(1)
    grids = np.stack([raw_grid(s) for s in range(200)])
    xy = rng.uniform(0.5, 15.5, (200, 2))
    np.testing.assert_array_equal(numba_impl.collides(grids, xy, 0.4), numpy_impl.collides(grids, xy, 0.4))


def test_bfs_matches_dijkstra(backend):
    for seed in range(50):
        grid = raw_grid(seed)
        grid[2, 2] = grid[13, 13] = False
        d = backend.bfs_distances(grid, 2, 2)[13, 13]
        want = dijkstra(grid, (2, 2), (13, 13))
        assert (d if d >= 0 else None) == want


def test_edt_matches_brute_force(backend):
    for seed in range(50):
        grid = raw_grid(seed, fill=0.15)
        np.testing.assert_array_equal(backend.edt(grid), brute_edt(grid))


def test_edt_without_obstacles_is_infinite(backend):
    assert np.all(np.isinf(backend.edt(np.zeros((4, 4), dtype=bool))))


def test_ca_smooth_backends_agree():
    for seed in range(10):
        g = raw_grid(seed, fill=0.45)
        np.testing.assert_array_equal(numba_impl.ca_smooth(g, 3), numpy_impl.ca_smooth(g, 3))


def test_ca_smooth_rule():
    g = np.zeros((5, 5), dtype=bool)
    g[1:4, 1:3] = True  # 6 occupied cells
    out = numpy_impl.ca_smooth(g, 1)
    # centre of the block has 6 of 9 occupied
    assert out[2, 1] and out[2, 2]
    # a cell with 4 occupied neighbors stays free
    assert not out[2, 3]


def test_gae_matches_brute_force(backend):
    rng = np.random.default_rng(11)
    for _ in range(100):
        t_len = int(rng.integers(1, 40))
        r = rng.normal(size=t_len)
        v = rng.normal(size=t_len)
        d = rng.random(t_len) < 0.15
        last = float(rng.normal())
        adv, ret = backend.gae(r[None], v[None], d[None], 0.99, 0.95, np.array([last]))
        want_adv, want_ret = brute_gae(r, v, d, 0.99, 0.95, last)
        assert np.max(np.abs(adv[0] - want_adv)) < 1e-12
        assert np.max(np.abs(ret[0] - want_ret)) < 1e-12


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    import os
    import subprocess
    import sys

    env = {**os.environ, "GACL_DISABLE_NUMBA": flag}
    out = subprocess.run([sys.executable, "-c", "from gacl import kernels; print(kernels.BACKEND)"], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == expected
