"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's numerical kernels; each routine is the
most direct loop-level statement of the quantity it computes.
"""

import math

import numpy as np


# -- scalar formulas ------------------------------------------------------

def measurement_sigma(z, k, lo, hi):
    return min(max(k * z * z, lo), hi)


def surface_thickness(z, k, lo, hi):
    return min(max(k * z, lo), hi)


def kinect_sigma(z, a, b, z0):
    return a + b * (z - z0) ** 2


def inverse_sensor_model(r, z_r, sigma, tau, l_min, l_max, scale):
    """Piecewise-linear profile written as interpolation between knots."""
    if r > z_r + tau:
        return None
    knots = [0.0, z_r - scale * sigma, z_r, z_r + tau / 2, z_r + tau]
    vals = [l_min, l_min, 0.0, l_max, l_max]
    if r <= knots[1]:
        return l_min
    for i in range(1, 4):
        if knots[i] <= r <= knots[i + 1]:
            u = (r - knots[i]) / (knots[i + 1] - knots[i])
            return vals[i] + u * (vals[i + 1] - vals[i])
    return l_max


# -- ray / voxel geometry -------------------------------------------------

def segment_voxels(origin, direction, t_end, grid_origin, res, size, min_overlap=1e-9):
    """All voxels whose box overlaps the segment by more than ``min_overlap``.

    Returns ``{(i, j, k): overlap_length}``. Brute force over the bounding
    box of the segment.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    g = np.asarray(grid_origin, dtype=np.float64)
    end = o + t_end * d
    lo = np.clip(np.floor((np.minimum(o, end) - g) / res).astype(int) - 1, 0, size - 1)
    hi = np.clip(np.floor((np.maximum(o, end) - g) / res).astype(int) + 1, 0, size - 1)
    ii, jj, kk = np.meshgrid(*(np.arange(lo[a], hi[a] + 1) for a in range(3)), indexing="ij")
    idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    box_lo = g + idx * res
    box_hi = box_lo + res
    t_lo = np.zeros(len(idx))
    t_hi = np.full(len(idx), float(t_end))
    for a in range(3):
        if d[a] == 0:
            inside = (o[a] >= box_lo[:, a]) & (o[a] < box_hi[:, a])
            t_hi = np.where(inside, t_hi, -np.inf)
            continue
        ta = (box_lo[:, a] - o[a]) / d[a]
        tb = (box_hi[:, a] - o[a]) / d[a]
        t_lo = np.maximum(t_lo, np.minimum(ta, tb))
        t_hi = np.minimum(t_hi, np.maximum(ta, tb))
    overlap = t_hi - t_lo
    keep = overlap > min_overlap
    return {tuple(int(v) for v in idx[n]): float(overlap[n]) for n in np.flatnonzero(keep)}


def frame_samples(origins, dirs, z_r, sigma, tau, free_only, grid_origin, res, size, l_min, l_max, scale):
    """Per-voxel sample of one frame: nearest ray wins, ties to the lower ray id.

    Returns ``{(i, j, k): (sample, dist2, overlap)}``.
    """
    best = {}
    g = np.asarray(grid_origin, dtype=np.float64)
    for n in range(len(dirs)):
        free_end = z_r[n] - scale * sigma[n]
        r_end = free_end if free_only[n] else z_r[n] + tau[n]
        if r_end <= 0:
            continue
        for key, overlap in segment_voxels(origins, dirs[n], r_end, g, res, size, min_overlap=0.0).items():
            c = g + (np.array(key) + 0.5) * res - origins
            rc = float(c @ dirs[n])
            if free_only[n] and rc >= free_end:
                continue
            s = inverse_sensor_model(rc, z_r[n], sigma[n], tau[n], l_min, l_max, scale)
            if s is None:
                continue
            d2 = max(float(c @ c) - rc * rc, 0.0)
            if key not in best or d2 < best[key][1]:
                best[key] = (s, d2, overlap)
    return best


# -- dense reference map --------------------------------------------------

class DenseMap:
    """Flat-array occupancy map with the same running-mean fusion rule."""

    def __init__(self, size, l_min, l_max, max_weight):
        self.size = size
        self.mean = np.zeros(size ** 3)
        self.weight = np.zeros(size ** 3, dtype=np.int64)
        self.l_min, self.l_max, self.max_weight = l_min, l_max, max_weight

    def fuse(self, vox, samples):
        for v, s in zip(np.asarray(vox).tolist(), np.asarray(samples).tolist()):
            w = int(self.weight[v])
            m = (float(self.mean[v]) * w + s) / (w + 1.0)
            self.mean[v] = min(max(m, self.l_min), self.l_max)
            self.weight[v] = min(w + 1, self.max_weight)

    def log_odds(self):
        out = self.mean * self.weight
        out[self.weight == 0] = np.nan
        return out.reshape((self.size,) * 3)

    def free_count(self, threshold):
        level = math.log(threshold / (1 - threshold))
        lo = self.mean * self.weight
        return int(np.sum((self.weight > 0) & (lo < level)))


# -- image and error metrics ----------------------------------------------

def sparsification_ause(errors, uncertainties, fractions):
    """Sparsification by explicit removal loops, trapezoid by explicit sum."""
    e = [abs(float(x)) for x in errors]
    u = [float(x) for x in uncertainties]
    n = len(e)
    base = sum(e) / n
    if base == 0:
        return 0.0

    def curve(key):
        order = sorted(range(n), key=lambda i: -key[i])     # sorted() is stable
        out = []
        for f in fractions:
            k = min(int(math.floor(f * n + 1e-9)), n - 1)
            rest = [e[i] for i in order[k:]]
            out.append(sum(rest) / len(rest) / base)
        return out

    diff = [a - b for a, b in zip(curve(u), curve(e))]
    area = 0.0
    for i in range(len(fractions) - 1):
        area += 0.5 * (diff[i] + diff[i + 1]) * (fractions[i + 1] - fractions[i])
    return area


def ssim(a, b, window, data_range, sigma=1.5):
    """Window-by-window Gaussian SSIM with explicit sums."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax = np.arange(window) - (window - 1) / 2
    g = np.exp(-ax ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    vals = []
    for i in range(a.shape[0] - window + 1):
        for j in range(a.shape[1] - window + 1):
            pa = a[i:i + window, j:j + window]
            pb = b[i:i + window, j:j + window]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def point_triangle_distance(p, a, b, c):
    """Plane distance when the projection falls inside, else nearest edge."""
    n = np.cross(b - a, c - a)
    nn = n @ n
    q = p - ((p - a) @ n) / nn * n
    # barycentric signs of the projection
    s1 = np.cross(b - a, q - a) @ n
    s2 = np.cross(c - b, q - b) @ n
    s3 = np.cross(a - c, q - c) @ n
    if s1 >= 0 and s2 >= 0 and s3 >= 0:
        return float(np.linalg.norm(p - q))
    return min(_segment_distance(p, a, b), _segment_distance(p, b, c), _segment_distance(p, c, a))


def point_mesh_distance(points, vertices, triangles):
    out = []
    for p in np.asarray(points, dtype=np.float64):
        out.append(min(point_triangle_distance(p, *vertices[t]) for t in triangles))
    return np.array(out)
