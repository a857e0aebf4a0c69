"""Scoring completed depth and its uncertainty.

A calibrated oracle ranks its own errors well (low AUSE); shuffling the
same uncertainties breaks the ranking, while rescaling them does not.

Run: python demos/03_uncertainty_quality.py
"""

import numpy as np

from compmap.evaluation import ause, depth_metrics, loss_eq1
from compmap.geometry import DepthImage
from compmap.pipeline import mock_complete
from compmap.sensor_models import HoleSynthConfig, synthesize_holes
from compmap.synthetic import BoxRoom, default_intrinsics, roam_trajectory

room = BoxRoom.default()
k = default_intrinsics(160, 120)
gt = room.render(roam_trajectory(room, 10)[3], k)
holed = synthesize_holes(gt, HoleSynthConfig(hole_fraction_target=0.4), seed=1)
pred, unc = mock_complete(gt, holed, noise_scale=5.0, unc_floor=0.001, seed=2)

m = depth_metrics(pred.values, gt.values)
print(f"rmse {m.rmse:.4f} m  mae {m.mae:.4f} m  " +
      "  ".join(f"d<{t:.3g}: {p:.1f}%" for t, p in m.delta_percentages.items()))

hole = (holed.values == 0) & (gt.values > 0)
err, u = np.abs(pred.values - gt.values)[hole], unc.values[hole]
rng = np.random.default_rng(0)
print(f"AUSE calibrated {ause(err, u):.4f}, tripled {ause(err, 3 * u):.4f}, shuffled {ause(err, rng.permutation(u)):.4f}")

total, nll, ssim_term, bc = loss_eq1(pred.values, unc.values, gt.values)
print(f"loss {total:.3f} = nll {nll:.3f} + ssim {ssim_term:.4f} + edges {bc:.4f}")
print(f"the same prediction against itself: {loss_eq1(gt.values, np.ones(gt.shape), gt.values)[0]}")
