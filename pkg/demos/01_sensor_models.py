"""How a single depth measurement turns into occupancy evidence.

Run: python demos/01_sensor_models.py
"""

import numpy as np

from compmap.config import PRESETS
from compmap.sensor_models import InverseSensorModelConfig, kinect_sigma, log_odds_sample, measurement_sigma, surface_thickness

cfg = PRESETS["interiornet"]
ism = InverseSensorModelConfig()

# Measurement noise grows with the square of depth, thickness linearly; both are clamped.
print("depth   sigma_r   tau     kinect")
for z in (0.5, 1.0, 2.0, 4.0, 8.0):
    print(f"{z:4.1f} m  {measurement_sigma(z, cfg.sigma):.4f}   {surface_thickness(z, cfg.tau):.3f}   {kinect_sigma(z):.4f}")

# Along the ray the evidence is free space up to the ramp, zero at the surface,
# occupied in the thickness band and nothing at all behind it.
z = 2.0
s, t = measurement_sigma(z, cfg.sigma), surface_thickness(z, cfg.tau)
print(f"\nprofile for z = {z} m (sigma {s:.4f} m, tau {t:.3f} m)")
for r in np.round(np.linspace(z - 0.06, z + t + 0.02, 12), 4):
    v = log_odds_sample(r, z, s, t, ism)
    bar = "" if np.isnan(v) else ("-" * int(round(-v * 4)) if v < 0 else "+" * int(round(v * 4)))
    label = "no update" if np.isnan(v) else f"{v:+.3f}"
    print(f"  r = {r:.4f}  {label:>9}  {bar}")
