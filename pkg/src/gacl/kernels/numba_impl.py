"""numba-compiled kernels. Semantics must match ``numpy_impl`` exactly."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_BIG = 1e20


@njit(cache=True)
def _occupied(grid, r, c):
    h, w = grid.shape
    if r < 0 or c < 0 or r >= h or c >= w:
        return True
    return grid[r, c] != 0


@njit(cache=True)
def _cast_one(grid, x, y, ang, r_max):
    cx = int(math.floor(x))
    cy = int(math.floor(y))
    if _occupied(grid, cy, cx):
        return 0.0
    dx = math.cos(ang)
    dy = math.sin(ang)
    if dx > 0.0:
        step_x = 1
        t_max_x = (cx + 1 - x) / dx
        t_dx = 1.0 / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (x - cx) / -dx
        t_dx = -1.0 / dx
    else:
        step_x = 0
        t_max_x = np.inf
        t_dx = np.inf
    if dy > 0.0:
        step_y = 1
        t_max_y = (cy + 1 - y) / dy
        t_dy = 1.0 / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (y - cy) / -dy
        t_dy = -1.0 / dy
    else:
        step_y = 0
        t_max_y = np.inf
        t_dy = np.inf
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            cx += step_x
            t_max_x += t_dx
        else:
            t = t_max_y
            cy += step_y
            t_max_y += t_dy
        if t >= r_max:
            return 1.0
        if _occupied(grid, cy, cx):
            return t / r_max


@njit(cache=True)
def raycast(grids, poses, n_rays, fov, r_max):
    n = poses.shape[0]
    out = np.empty((n, n_rays))
    spacing = fov / (n_rays - 1) if n_rays > 1 else 0.0
    for i in range(n):
        x, y, th = poses[i, 0], poses[i, 1], poses[i, 2]
        for k in range(n_rays):
            ang = th - fov / 2.0 + k * spacing
            out[i, k] = _cast_one(grids[i], x, y, ang, r_max)
    return out


@njit(cache=True)
def collides(grids, xy, radius):
    n = xy.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    r2 = radius * radius
    for i in range(n):
        x, y = xy[i, 0], xy[i, 1]
        c0 = int(math.floor(x - radius))
        c1 = int(math.floor(x + radius))
        r0 = int(math.floor(y - radius))
        r1 = int(math.floor(y + radius))
        hit = False
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if not _occupied(grids[i], r, c):
                    continue
                ddx = max(c - x, 0.0, x - (c + 1))
                ddy = max(r - y, 0.0, y - (r + 1))
                if ddx * ddx + ddy * ddy <= r2:
                    hit = True
        out[i] = hit
    return out


@njit(cache=True)
def bfs_distances(grid, src_row, src_col):
    h, w = grid.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if _occupied(grid, src_row, src_col):
        return dist
    q_r = np.empty(h * w, dtype=np.int32)
    q_c = np.empty(h * w, dtype=np.int32)
    head = 0
    tail = 1
    q_r[0] = src_row
    q_c[0] = src_col
    dist[src_row, src_col] = 0
    dr = (-1, 1, 0, 0)
    dc = (0, 0, -1, 1)
    while head < tail:
        r = q_r[head]
        c = q_c[head]
        head += 1
        for k in range(4):
            nr = r + dr[k]
            nc = c + dc[k]
            if _occupied(grid, nr, nc) or dist[nr, nc] >= 0:
                continue
            dist[nr, nc] = dist[r, c] + 1
            q_r[tail] = nr
            q_c[tail] = nc
            tail += 1
    return dist


@njit(cache=True)
def _dt1d(f, n, d, v, z):
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit(cache=True)
def edt(grid):
    h, w = grid.shape
    out = np.empty((h, w))
    any_occ = False
    for r in range(h):
        for c in range(w):
            if grid[r, c] != 0:
                any_occ = True
    if not any_occ:
        out[:, :] = np.inf
        return out
    m = max(h, w)
    f = np.empty(m)
    d = np.empty(m)
    v = np.empty(m, dtype=np.int64)
    z = np.empty(m + 1)
    for c in range(w):
        for r in range(h):
            f[r] = 0.0 if grid[r, c] != 0 else _BIG
        _dt1d(f, h, d, v, z)
        for r in range(h):
            out[r, c] = d[r]
    for r in range(h):
        for c in range(w):
            f[c] = out[r, c]
        _dt1d(f, w, d, v, z)
        for c in range(w):
            out[r, c] = math.sqrt(d[c])
    return out


@njit(cache=True)
def ca_smooth(grid, iters):
    h, w = grid.shape
    cur = grid.copy()
    nxt = np.empty_like(cur)
    for _ in range(iters):
        for r in range(h):
            for c in range(w):
                cnt = 0
                for dr in range(-1, 2):
                    for dc in range(-1, 2):
                        if _occupied(cur, r + dr, c + dc):
                            cnt += 1
                nxt[r, c] = cnt >= 5
        cur, nxt = nxt, cur
    return cur


@njit(cache=True)
def gae(rewards, values, dones, gamma, lam, last_values):
    n, t_len = rewards.shape
    adv = np.zeros((n, t_len))
    for i in range(n):
        running = 0.0
        next_value = last_values[i]
        for t in range(t_len - 1, -1, -1):
            nonterm = 0.0 if dones[i, t] else 1.0
            delta = rewards[i, t] + gamma * next_value * nonterm - values[i, t]
            running = delta + gamma * lam * nonterm * running
            adv[i, t] = running
            next_value = values[i, t]
    return adv, adv + values
