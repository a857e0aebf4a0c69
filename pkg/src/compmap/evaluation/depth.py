"""Depth prediction and uncertainty quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DELTA_THRESHOLDS = (1.05, 1.10, 1.25, 1.25 ** 2, 1.25 ** 3)
DEFAULT_FRACTIONS = tuple(np.round(np.arange(100) / 100.0, 2))


@dataclass(frozen=True)
class DepthMetrics:
    rmse: float
    mae: float
    delta_percentages: dict
    n_pixels: int = 0


def depth_metrics(pred, gt, thresholds=DELTA_THRESHOLDS, convention: str = "ratio") -> DepthMetrics:
    """RMSE, MAE and threshold accuracies over pixels valid in ``gt``.

    With the ``"ratio"`` convention the accuracy for threshold ``t`` is the
    percentage of pixels with ``max(pred/gt, gt/pred) < t``. ``"relative"``
    uses ``|pred - gt| / gt < t`` instead. Invalid predictions always miss.
    """
    if convention not in ("ratio", "relative"):
        raise ValueError(f"unknown delta convention {convention!r}")
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError("prediction and ground truth dimensions differ")
    valid = g > 0
    if not np.any(valid):
        raise ValueError("ground truth has no valid pixels")
    p, g = p[valid], g[valid]
    err = p - g
    if convention == "ratio":
        with np.errstate(divide="ignore"):
            ratio = np.where(p > 0, np.maximum(p / g, g / np.where(p > 0, p, 1.0)), np.inf)
    else:
        ratio = np.where(p > 0, np.abs(err) / g, np.inf)
    deltas = {t: 100.0 * float(np.mean(ratio < t)) for t in thresholds}
    return DepthMetrics(float(np.sqrt(np.mean(err ** 2))), float(np.mean(np.abs(err))), deltas, int(g.size))


def sparsification_curve(abs_errors, ordering_key, fractions=DEFAULT_FRACTIONS) -> np.ndarray:
    """MAE of the pixels left after dropping the top fraction ranked by ``ordering_key``."""
    e = np.asarray(abs_errors, dtype=np.float64)
    order = np.argsort(-np.asarray(ordering_key, dtype=np.float64), kind="stable")
    # suffix sums give the remaining error after removing the first k ranked pixels
    sorted_e = e[order]
    suffix = np.concatenate([np.cumsum(sorted_e[::-1])[::-1], [0.0]])
    n = e.size
    out = np.empty(len(fractions))
    for i, f in enumerate(fractions):
        k = min(int(np.floor(f * n + 1e-9)), n - 1)
        out[i] = suffix[k] / (n - k)
    return out


def ause(abs_errors, uncertainties, fractions=DEFAULT_FRACTIONS) -> float:
    """Area between the uncertainty- and error-ranked sparsification curves.

    Both curves are normalised by the MAE of all pixels. A perfect ranking
    yields 0; all-zero errors are reported as 0.
    """
    e = np.abs(np.asarray(abs_errors, dtype=np.float64)).ravel()
    u = np.asarray(uncertainties, dtype=np.float64).ravel()
    if e.size == 0:
        raise ValueError("empty input")
    if e.size != u.size:
        raise ValueError("errors and uncertainties differ in length")
    fractions = np.asarray(fractions, dtype=np.float64)
    if np.any(np.diff(fractions) <= 0) or fractions[0] < 0 or fractions[-1] >= 1:
        raise ValueError("fractions must ascend within [0, 1)")
    base = e.mean()
    if base == 0:
        return 0.0
    spars = sparsification_curve(e, u, fractions) / base
    oracle = sparsification_curve(e, e, fractions) / base
    return float(np.trapezoid(spars - oracle, fractions))
