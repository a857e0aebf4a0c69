"""Small randomized scenes shared by the map tests."""

import numpy as np

from compmap.geometry import DepthImage, Pose, UncertaintyImage
from compmap.occupancy import MapConfig
from compmap.synthetic import BoxRoom, default_intrinsics

# off-grid origin so rays rarely run along voxel faces
SMALL_MAP = MapConfig(3.2, 0.05, max_weight=100, origin=(-0.0137, 0.0091, -0.0213))
SMALL_ROOM = BoxRoom(np.array([0.25, 0.25, 0.25]), np.array([2.95, 2.95, 2.95]),
                     [(np.array([0.6, 0.6, 0.25]), np.array([1.2, 1.4, 1.0])),
                      (np.array([1.9, 1.7, 0.25]), np.array([2.5, 2.6, 1.8]))])


def random_frame(rng, room=SMALL_ROOM, width=24, height=18, free_fraction=0.25):
    """Depth, per-pixel sigma, pose, intrinsics and a free-only mask for one random view."""
    k = default_intrinsics(width, height, hfov_deg=rng.uniform(50, 80))
    while True:
        eye = rng.uniform(room.room_min + 0.2, room.room_max - 0.2)
        if not room.is_solid(eye[None])[0]:
            break
    yaw, pitch = rng.uniform(0, 2 * np.pi), rng.uniform(-0.6, 0.6)
    target = eye + np.array([np.cos(yaw) * np.cos(pitch), np.sin(yaw) * np.cos(pitch), np.sin(pitch)])
    pose = Pose.look_at(eye, target)
    z = room.render(pose, k).values.copy()
    z[rng.random(z.shape) < 0.1] = 0.0
    sigma = np.where(z > 0, rng.uniform(0.005, 0.06, z.shape), 0.0)
    free_only = rng.random(z.shape) < free_fraction
    return DepthImage(z), UncertaintyImage(sigma), pose, k, free_only
