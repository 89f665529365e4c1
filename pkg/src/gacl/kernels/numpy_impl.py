"""Pure-numpy kernels. Vectorized across rays / envs where the algorithm allows."""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def _occ_lookup(grids, env, r, c):
    """Occupancy of ``grids[env, r, c]`` with out-of-bounds treated as occupied."""
    _, h, w = grids.shape
    inside = (r >= 0) & (c >= 0) & (r < h) & (c < w)
    out = np.ones(r.shape, dtype=bool)
    out[inside] = grids[env[inside], r[inside], c[inside]] != 0
    return out


def raycast(grids, poses, n_rays, fov, r_max):
    n = poses.shape[0]
    spacing = fov / (n_rays - 1) if n_rays > 1 else 0.0
    k = np.arange(n_rays)
    ang = (poses[:, 2:3] - fov / 2.0 + k[None, :] * spacing).ravel()
    env = np.repeat(np.arange(n), n_rays)
    x = np.repeat(poses[:, 0], n_rays)
    y = np.repeat(poses[:, 1], n_rays)
    cx = np.floor(x).astype(np.int64)
    cy = np.floor(y).astype(np.int64)
    dx = np.cos(ang)
    dy = np.sin(ang)

    with np.errstate(divide="ignore", invalid="ignore"):
        step_x = np.sign(dx).astype(np.int64)
        step_y = np.sign(dy).astype(np.int64)
        t_dx = np.where(dx != 0.0, 1.0 / np.abs(dx), np.inf)
        t_dy = np.where(dy != 0.0, 1.0 / np.abs(dy), np.inf)
        t_max_x = np.where(dx > 0.0, (cx + 1 - x) / dx, np.where(dx < 0.0, (x - cx) / -dx, np.inf))
        t_max_y = np.where(dy > 0.0, (cy + 1 - y) / dy, np.where(dy < 0.0, (y - cy) / -dy, np.inf))

    out = np.empty(n * n_rays)
    active = ~_occ_lookup(grids, env, cy, cx)
    out[~active] = 0.0
    while active.any():
        idx = np.nonzero(active)[0]
        use_x = t_max_x[idx] < t_max_y[idx]
        ix, iy = idx[use_x], idx[~use_x]
        t = np.empty(idx.shape[0])
        t[use_x] = t_max_x[ix]
        t[~use_x] = t_max_y[iy]
        cx[ix] += step_x[ix]
        t_max_x[ix] += t_dx[ix]
        cy[iy] += step_y[iy]
        t_max_y[iy] += t_dy[iy]
        far = t >= r_max
        out[idx[far]] = 1.0
        hit = ~far & _occ_lookup(grids, env[idx], cy[idx], cx[idx])
        out[idx[hit]] = t[hit] / r_max
        active[idx[far | hit]] = False
    return out.reshape(n, n_rays)


def collides(grids, xy, radius):
    n = xy.shape[0]
    span = int(np.ceil(radius)) + 1
    x = xy[:, 0:1]
    y = xy[:, 1:2]
    offs = np.arange(-span, span + 1)
    c = np.floor(x).astype(np.int64) + offs[None, :]
    r = np.floor(y).astype(np.int64) + offs[None, :]
    ddx = np.maximum.reduce([c - x, np.zeros_like(x + c), x - (c + 1)])
    ddy = np.maximum.reduce([r - y, np.zeros_like(y + r), y - (r + 1)])
    d2 = ddy[:, :, None] ** 2 + ddx[:, None, :] ** 2
    rr = np.broadcast_to(r[:, :, None], d2.shape)
    cc = np.broadcast_to(c[:, None, :], d2.shape)
    env = np.broadcast_to(np.arange(n)[:, None, None], d2.shape)
    occ = _occ_lookup(grids, env, rr, cc)
    return np.any(occ & (d2 <= radius * radius), axis=(1, 2))


def bfs_distances(grid, src_row, src_col):
    h, w = grid.shape
    free = grid == 0
    dist = np.full((h, w), -1, dtype=np.int32)
    if not (0 <= src_row < h and 0 <= src_col < w) or not free[src_row, src_col]:
        return dist
    frontier = np.zeros((h, w), dtype=bool)
    frontier[src_row, src_col] = True
    seen = frontier.copy()
    d = 0
    while frontier.any():
        dist[frontier] = d
        grow = np.zeros_like(frontier)
        grow[1:, :] |= frontier[:-1, :]
        grow[:-1, :] |= frontier[1:, :]
        grow[:, 1:] |= frontier[:, :-1]
        grow[:, :-1] |= frontier[:, 1:]
        frontier = grow & free & ~seen
        seen |= frontier
        d += 1
    return dist


def edt(grid):
    occ = grid != 0
    if not occ.any():
        return np.full(grid.shape, np.inf)
    return ndimage.distance_transform_edt(~occ).astype(np.float64)


def ca_smooth(grid, iters):
    cur = np.asarray(grid, dtype=bool)
    h, w = cur.shape
    for _ in range(iters):
        pad = np.ones((h + 2, w + 2), dtype=np.int32)
        pad[1:-1, 1:-1] = cur
        cnt = sum(pad[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr in (-1, 0, 1) for dc in (-1, 0, 1))
        cur = cnt >= 5
    return cur


def gae(rewards, values, dones, gamma, lam, last_values):
    n, t_len = rewards.shape
    adv = np.zeros((n, t_len))
    running = np.zeros(n)
    next_value = np.asarray(last_values, dtype=np.float64).copy()
    for t in range(t_len - 1, -1, -1):
        nonterm = 1.0 - dones[:, t].astype(np.float64)
        delta = rewards[:, t] + gamma * next_value * nonterm - values[:, t]
        running = delta + gamma * lam * nonterm * running
        adv[:, t] = running
        next_value = values[:, t]
    return adv, adv + values
