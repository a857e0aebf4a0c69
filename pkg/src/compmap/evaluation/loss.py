"""Depth completion loss terms: Gaussian NLL, SSIM and Sobel boundary consistency.

These are scoring functions only; nothing here trains a model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


@dataclass(frozen=True)
class LossConfig:
    lambda_bc: float = 1.0
    lambda_ssim: float = 1.0
    ssim_window: int = 7
    variance_floor: float = 1e-6
    # False adds raw SSIM instead of the dissimilarity (1 - SSIM) / 2
    ssim_as_dissimilarity: bool = True

    def __post_init__(self):
        if self.lambda_bc < 0 or self.lambda_ssim < 0:
            raise ValueError("loss weights must be non-negative")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be odd and at least 3")
        if self.variance_floor < 0:
            raise ValueError("variance_floor must be non-negative")


def gaussian_window(size: int, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b, window: int = 7, data_range: float | None = None) -> np.ndarray:
    """SSIM of every fully contained ``window x window`` patch (Gaussian weighted).

    ``data_range`` defaults to the joint value range of both images, falling
    back to 1 for constant inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images differ in shape")
    if min(a.shape) < window:
        raise ValueError(f"image {a.shape} is smaller than the {window}px window")
    if data_range is None:
        data_range = float(max(a.max(), b.max()) - min(a.min(), b.min()))
    if data_range <= 0:
        data_range = 1.0
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    w = gaussian_window(window)

    def wmean(x):
        return np.einsum("ijkl,kl->ij", sliding_window_view(x, (window, window)), w)

    mu_a, mu_b = wmean(a), wmean(b)
    var_a = wmean(a * a) - mu_a * mu_a
    var_b = wmean(b * b) - mu_b * mu_b
    cov = wmean(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, window: int = 7, data_range: float | None = None) -> float:
    return float(np.mean(ssim_map(a, b, window, data_range)))


def sobel_edges(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    gx = ndimage.correlate(img, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, SOBEL_Y, mode="nearest")
    return np.sqrt(gx * gx + gy * gy)


def nll_terms(y, f, sigma, variance_floor: float = 0.0):
    """Per-pixel ``|y - f|^2 / sigma^2 + log sigma^2`` with ``sigma^2`` floored."""
    y, f, sigma = (np.asarray(v, dtype=np.float64) for v in (y, f, sigma))
    var = np.maximum(sigma * sigma, variance_floor)
    if np.any(var <= 0):
        raise ValueError("zero uncertainty with a zero variance floor")
    return (y - f) ** 2 / var + np.log(var)


def nll_gradients(y, f, sigma):
    """Analytic partials of the Gaussian NLL term with respect to ``f`` and ``sigma``."""
    y, f, sigma = (np.asarray(v, dtype=np.float64) for v in (y, f, sigma))
    r = y - f
    d_f = -2.0 * r / sigma ** 2
    d_sigma = -2.0 * r * r / sigma ** 3 + 2.0 / sigma
    if d_f.ndim == 0:
        return float(d_f), float(d_sigma)
    return d_f, d_sigma


def loss_eq1(pred, sigma, gt, cfg: LossConfig = LossConfig()):
    """Total loss and its three components over pixels valid in ``gt``.

    Returns ``(total, nll_term, ssim_term, bc_term)``; the SSIM and boundary
    terms already include their weights. SSIM windows count when their
    centre pixel is valid and use the ground truth's value range.
    """
    p = np.asarray(pred, dtype=np.float64)
    s = np.asarray(sigma, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if not (p.shape == s.shape == g.shape):
        raise ValueError("prediction, uncertainty and ground truth dimensions differ")
    valid = g > 0
    if not np.any(valid):
        raise ValueError("ground truth has no valid pixels")

    nll = float(np.mean(nll_terms(g[valid], p[valid], s[valid], cfg.variance_floor)))

    ssim_term = 0.0
    if cfg.lambda_ssim > 0 and min(g.shape) >= cfg.ssim_window:
        rng = float(g[valid].max() - g[valid].min())
        smap = ssim_map(g, p, cfg.ssim_window, rng if rng > 0 else None)
        h = cfg.ssim_window // 2
        centre_valid = valid[h:g.shape[0] - h, h:g.shape[1] - h]
        if np.any(centre_valid):
            vals = smap[centre_valid]
            vals = (1.0 - vals) / 2.0 if cfg.ssim_as_dissimilarity else vals
            ssim_term = cfg.lambda_ssim * float(np.mean(vals))

    bc_term = 0.0
    if cfg.lambda_bc > 0:
        bc_term = cfg.lambda_bc * float(np.mean(np.abs(sobel_edges(g) - sobel_edges(p))[valid]))

    return nll + ssim_term + bc_term, nll, ssim_term, bc_term
