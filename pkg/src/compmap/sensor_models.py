"""Analytic depth sensor models.

Covers the quadratic measurement uncertainty, the surface thickness, the
piecewise-linear inverse sensor model in log-odds space, Kinect-style noise
degradation and procedural hole synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .geometry import DepthImage

NO_UPDATE = _kernels.NO_UPDATE


@dataclass(frozen=True)
class MeasurementSigmaConfig:
    k_sigma: float = 0.0016
    sigma_min: float = 0.005
    sigma_max: float = 0.02

    def __post_init__(self):
        if not (self.k_sigma > 0 and 0 < self.sigma_min <= self.sigma_max):
            raise ValueError(f"invalid measurement sigma config: {self}")


@dataclass(frozen=True)
class SurfaceThicknessConfig:
    k_tau: float = 0.026
    tau_min: float = 0.06
    tau_max: float = 0.16

    def __post_init__(self):
        if not (self.k_tau > 0 and 0 < self.tau_min <= self.tau_max):
            raise ValueError(f"invalid surface thickness config: {self}")


@dataclass(frozen=True)
class InverseSensorModelConfig:
    """Log-odds bounds of the inverse sensor model.

    ``sigma_scale`` places the start of the free-to-surface ramp at
    ``z_r - sigma_scale * sigma_r``.
    """

    l_min: float = -5.015
    l_max: float = 5.015
    sigma_scale: float = 3.0

    def __post_init__(self):
        if not (self.l_min < 0 < self.l_max):
            raise ValueError("need l_min < 0 < l_max")
        if not self.sigma_scale > 0:
            raise ValueError("sigma_scale must be positive")


@dataclass(frozen=True)
class KinectNoiseConfig:
    a: float = 0.0012
    b: float = 0.0019
    z0: float = 0.4
    blur_sigma: float = 0.5

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.blur_sigma < 0:
            raise ValueError(f"invalid Kinect noise config: {self}")


@dataclass(frozen=True)
class HoleSynthConfig:
    min_range: float = 0.8
    max_range: float = 6.0
    blob_count_range: tuple[int, int] = (200, 500)
    blob_radius_range: tuple[float, float] = (2.0, 10.0)
    hole_fraction_target: float = 0.3

    def __post_init__(self):
        if not 0 < self.min_range < self.max_range:
            raise ValueError("need 0 < min_range < max_range")
        if not 0 <= self.hole_fraction_target < 1:
            raise ValueError("hole_fraction_target must lie in [0, 1)")
        lo, hi = self.blob_count_range
        if not 0 <= lo <= hi:
            raise ValueError("invalid blob_count_range")
        rlo, rhi = self.blob_radius_range
        if not 0 < rlo <= rhi:
            raise ValueError("invalid blob_radius_range")
        object.__setattr__(self, "blob_count_range", (int(lo), int(hi)))
        object.__setattr__(self, "blob_radius_range", (float(rlo), float(rhi)))


def measurement_sigma(z, cfg: MeasurementSigmaConfig):
    """Depth standard deviation ``clamp(k_sigma * z**2, sigma_min, sigma_max)``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.minimum(np.maximum(cfg.k_sigma * z * z, cfg.sigma_min), cfg.sigma_max)
    return out if out.ndim else float(out)


def surface_thickness(z, cfg: SurfaceThicknessConfig):
    z = np.asarray(z, dtype=np.float64)
    out = np.minimum(np.maximum(cfg.k_tau * z, cfg.tau_min), cfg.tau_max)
    return out if out.ndim else float(out)


def kinect_sigma(z, cfg: KinectNoiseConfig = KinectNoiseConfig()):
    z = np.asarray(z, dtype=np.float64)
    out = cfg.a + cfg.b * (z - cfg.z0) ** 2
    return out if out.ndim else float(out)


def log_odds_sample(r, z_r, sigma_r, tau, cfg: InverseSensorModelConfig):
    """Log-odds occupancy evidence at distance ``r`` along a measured ray.

    The profile is ``l_min`` near the camera, ramps linearly to 0 at the
    measurement ``z_r``, rises to ``l_max`` at ``z_r + tau/2`` and holds it
    until ``z_r + tau``. Beyond that the result is ``NO_UPDATE`` (NaN).
    Accepts scalars or broadcastable arrays.
    """
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (r, z_r, sigma_r, tau)))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(a).ravel() for a in arrs]
    out = _kernels.log_odds_array(*flat, cfg.l_min, cfg.l_max, cfg.sigma_scale).reshape(shape)
    return out if out.ndim else float(out)


def is_no_update(value) -> bool:
    return bool(np.isnan(value))


def _normalized_blur(values: np.ndarray, valid: np.ndarray, sigma: float) -> np.ndarray:
    # truncate-and-renormalize: only valid pixels inside the image contribute
    w = ndimage.gaussian_filter(valid.astype(np.float64), sigma, mode="constant", cval=0.0)
    s = ndimage.gaussian_filter(np.where(valid, values, 0.0), sigma, mode="constant", cval=0.0)
    out = np.zeros_like(values)
    np.divide(s, w, out=out, where=valid & (w > 0))
    return out


def degrade_depth(gt: DepthImage, cfg: KinectNoiseConfig, seed: int) -> DepthImage:
    """Add depth-dependent Gaussian noise, then blur it across neighbours."""
    z = np.asarray(gt.values)
    valid = z > 0
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(z.shape) * kinect_sigma(z, cfg)
    noisy = np.where(valid, z + noise, 0.0)
    if cfg.blur_sigma > 0:
        noisy = _normalized_blur(noisy, valid, cfg.blur_sigma)
    noisy[~valid | (noisy < 0)] = 0.0
    return DepthImage(noisy)


def synthesize_holes(depth: DepthImage, cfg: HoleSynthConfig, seed: int) -> DepthImage:
    """Zero out-of-range pixels and punch elliptical holes into the rest.

    Blobs are placed until ``hole_fraction_target`` of the originally valid
    pixels are invalid, or the blob budget drawn from ``blob_count_range``
    runs out. The blob that would overshoot the target is trimmed to the
    pixels nearest its centre.
    """
    z = np.array(depth.values)
    orig_valid = z > 0
    n_valid = int(orig_valid.sum())
    z[(z < cfg.min_range) | (z > cfg.max_range)] = 0.0
    if n_valid == 0 or cfg.hole_fraction_target <= 0:
        return DepthImage(z)

    rng = np.random.default_rng(seed)
    h, w = z.shape
    target = int(round(cfg.hole_fraction_target * n_valid))
    budget = int(rng.integers(cfg.blob_count_range[0], cfg.blob_count_range[1] + 1))
    vv, uu = np.mgrid[0:h, 0:w]
    rlo, rhi = cfg.blob_radius_range
    for _ in range(budget):
        voided = n_valid - int((z > 0).sum())
        if voided >= target:
            break
        cu, cv = rng.uniform(0, w), rng.uniform(0, h)
        ru, rv = rng.uniform(rlo, rhi), rng.uniform(rlo, rhi)
        rho = ((uu - cu) / ru) ** 2 + ((vv - cv) / rv) ** 2
        hit = (rho <= 1.0) & (z > 0)
        n_hit = int(hit.sum())
        if n_hit == 0:
            continue
        need = target - voided
        if n_hit > need:
            idx = np.flatnonzero(hit)
            order = np.argsort(rho.ravel()[idx], kind="stable")
            hit = np.zeros_like(hit)
            hit.ravel()[idx[order[:need]]] = True
        z[hit] = 0.0
    return DepthImage(z)
