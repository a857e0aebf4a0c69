"""Numba kernels shared by the sensor model and the octree integrator.

Everything that has to be bit-identical between the public numpy-facing
functions and the fusion core lives here.
"""

import numpy as np
from numba import njit

NO_UPDATE = np.nan


@njit(cache=True)
def clamp(x, lo, hi):
    return min(max(x, lo), hi)


@njit(cache=True)
def log_odds_scalar(r, z_r, sigma_r, tau, l_min, l_max, sigma_scale):
    """Piecewise-linear inverse sensor model; NaN means "do not update"."""
    if r > z_r + tau:
        return np.nan
    if r >= z_r + 0.5 * tau:
        return l_max
    if r >= z_r:
        return l_max * (r - z_r) / (0.5 * tau)
    ramp = sigma_scale * sigma_r
    if r <= z_r - ramp:
        return l_min
    return l_min * (z_r - r) / ramp


@njit(cache=True)
def log_odds_array(r, z_r, sigma_r, tau, l_min, l_max, sigma_scale):
    out = np.empty(r.size)
    for i in range(r.size):
        out[i] = log_odds_scalar(r[i], z_r[i], sigma_r[i], tau[i], l_min, l_max, sigma_scale)
    return out


@njit(cache=True)
def fuse_scalar(mean, weight, sample, l_min, l_max, max_weight):
    """Weighted running mean of log-odds with a saturating weight."""
    m = (mean * weight + sample) / (weight + 1.0)
    m = min(max(m, l_min), l_max)
    w = min(weight + 1, max_weight)
    return m, w
