"""Grid ray traversal producing per-voxel inverse-sensor-model samples."""

import numpy as np
from numba import njit

from ._kernels import log_odds_scalar


@njit(cache=True)
def _clip_to_box(o, d, lo, hi, t0, t1):
    # slab test; returns the clipped interval or (1, 0) when empty
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < lo[a] or o[a] >= hi[a]:
                return 1.0, 0.0
        else:
            ta = (lo[a] - o[a]) / d[a]
            tb = (hi[a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    return t0, t1


@njit(cache=True)
def _floor_index(x, size):
    i = int(np.floor(x))
    if i < 0:
        return 0
    if i >= size:
        return size - 1
    return i


@njit(cache=True)
def traverse(origin, direction, t_end, grid_origin, res, size):
    """Voxels pierced by the segment ``origin + t*direction, t in [0, t_end]``.

    ``direction`` must be unit length. Returns an ``(n, 3)`` int64 array of
    voxel indices in visiting order.
    """
    lo = grid_origin
    hi = grid_origin + size * res
    t0, t1 = _clip_to_box(origin, direction, lo, hi, 0.0, t_end)
    if t0 > t1:
        return np.empty((0, 3), dtype=np.int64)
    g = np.empty(3)
    idx = np.empty(3, dtype=np.int64)
    last = np.empty(3, dtype=np.int64)
    for a in range(3):
        g[a] = (origin[a] - grid_origin[a]) / res
        idx[a] = _floor_index(g[a] + t0 * direction[a] / res, size)
        last[a] = _floor_index(g[a] + t1 * direction[a] / res, size)
    n_max = 1
    for a in range(3):
        n_max += abs(last[a] - idx[a])
    out = np.empty((n_max + 3, 3), dtype=np.int64)
    n = _walk(origin, direction, t0, t1, grid_origin, res, size, idx, out)
    return out[:n]


@njit(cache=True)
def _walk(origin, direction, t0, t1, grid_origin, res, size, idx, out):
    step = np.zeros(3, dtype=np.int64)
    t_max = np.full(3, np.inf)
    t_delta = np.full(3, np.inf)
    for a in range(3):
        if direction[a] > 0:
            step[a] = 1
            boundary = grid_origin[a] + (idx[a] + 1) * res
            t_max[a] = (boundary - origin[a]) / direction[a]
            t_delta[a] = res / direction[a]
        elif direction[a] < 0:
            step[a] = -1
            boundary = grid_origin[a] + idx[a] * res
            t_max[a] = (boundary - origin[a]) / direction[a]
            t_delta[a] = -res / direction[a]
    n = 0
    cap = out.shape[0]
    while n < cap:
        out[n, 0] = idx[0]
        out[n, 1] = idx[1]
        out[n, 2] = idx[2]
        n += 1
        a = 0
        if t_max[1] < t_max[a]:
            a = 1
        if t_max[2] < t_max[a]:
            a = 2
        if t_max[a] > t1:
            break
        idx[a] += step[a]
        if idx[a] < 0 or idx[a] >= size:
            break
        t_max[a] += t_delta[a]
    return n


@njit(cache=True)
def cast_rays(origin, dirs, z_r, sigma, tau, r_end, free_limit,
              grid_origin, res, size, l_min, l_max, sigma_scale):
    """Cast every ray and emit (voxel, sample, squared ray distance, ray id).

    A voxel's sample is the inverse sensor model evaluated at the projection
    of the voxel centre onto the ray. Samples flagged "no update" and samples
    at or beyond ``free_limit`` are dropped.
    """
    n_rays = dirs.shape[0]
    lo = grid_origin
    hi = grid_origin + size * res
    bounds = np.zeros(n_rays + 1, dtype=np.int64)
    idx0 = np.empty((n_rays, 3), dtype=np.int64)
    t_in = np.empty(n_rays)
    t_out = np.empty(n_rays)
    for i in range(n_rays):
        d = dirs[i]
        t0, t1 = _clip_to_box(origin, d, lo, hi, 0.0, r_end[i])
        t_in[i] = t0
        t_out[i] = t1
        count = 0
        if t0 <= t1:
            count = 1
            for a in range(3):
                ga = (origin[a] - grid_origin[a]) / res
                i0 = _floor_index(ga + t0 * d[a] / res, size)
                i1 = _floor_index(ga + t1 * d[a] / res, size)
                idx0[i, a] = i0
                count += abs(i1 - i0)
            count += 3
        bounds[i + 1] = bounds[i] + count

    total = bounds[n_rays]
    visits = np.empty((total, 3), dtype=np.int64)
    vox = np.empty(total, dtype=np.int64)
    samples = np.empty(total)
    dist2 = np.empty(total)
    ray_id = np.empty(total, dtype=np.int64)
    n_out = 0
    idx = np.empty(3, dtype=np.int64)
    for i in range(n_rays):
        if t_in[i] > t_out[i]:
            continue
        seg = visits[bounds[i]:bounds[i + 1]]
        for a in range(3):
            idx[a] = idx0[i, a]
        n = _walk(origin, dirs[i], t_in[i], t_out[i], grid_origin, res, size, idx, seg)
        for k in range(n):
            cx = grid_origin[0] + (seg[k, 0] + 0.5) * res - origin[0]
            cy = grid_origin[1] + (seg[k, 1] + 0.5) * res - origin[1]
            cz = grid_origin[2] + (seg[k, 2] + 0.5) * res - origin[2]
            rc = cx * dirs[i, 0] + cy * dirs[i, 1] + cz * dirs[i, 2]
            if rc >= free_limit[i]:
                continue
            s = log_odds_scalar(rc, z_r[i], sigma[i], tau[i], l_min, l_max, sigma_scale)
            if np.isnan(s):
                continue
            vox[n_out] = (seg[k, 0] * size + seg[k, 1]) * size + seg[k, 2]
            samples[n_out] = s
            dist2[n_out] = max(cx * cx + cy * cy + cz * cz - rc * rc, 0.0)
            ray_id[n_out] = i
            n_out += 1
    return vox[:n_out], samples[:n_out], dist2[:n_out], ray_id[:n_out]


@njit(cache=True)
def nearest_ray_samples(vox, samples, dist2, ray_id):
    """Keep one sample per voxel: the one from the ray passing closest to its centre.

    Ties on distance go to the lower ray id. Output is sorted by voxel index.
    """
    order = np.argsort(vox, kind="mergesort")
    n = vox.size
    out_vox = np.empty(n, dtype=np.int64)
    out_s = np.empty(n)
    m = 0
    k = 0
    while k < n:
        v = vox[order[k]]
        best = order[k]
        j = k + 1
        while j < n and vox[order[j]] == v:
            c = order[j]
            if dist2[c] < dist2[best] or (dist2[c] == dist2[best] and ray_id[c] < ray_id[best]):
                best = c
            j += 1
        out_vox[m] = v
        out_s[m] = samples[best]
        m += 1
        k = j
    return out_vox[:m], out_s[:m]
