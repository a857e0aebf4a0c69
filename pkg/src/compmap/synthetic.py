"""Analytic scenes for self-contained experiments.

Depth is ray cast exactly against axis-aligned boxes and spheres, so the
rendered images double as ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, DepthImage, Pose


def _world_rays(pose: Pose, intrinsics: CameraIntrinsics) -> np.ndarray:
    # unit-z camera rays rotated to world: the ray parameter equals z-depth
    return intrinsics.pixel_rays().reshape(-1, 3) @ pose.rotation_matrix.T


def _slab(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo - o) * inv
        t2 = (hi - o) * inv
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    t_near = np.max(np.minimum(t1, t2), axis=1)
    t_far = np.min(np.maximum(t1, t2), axis=1)
    return t_near, t_far


@dataclass
class BoxRoom:
    """Closed room with solid boxes inside. Cameras must be inside the room."""

    room_min: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.3]))
    room_max: np.ndarray = field(default_factory=lambda: np.array([5.3, 5.3, 5.3]))
    boxes: list = field(default_factory=list)

    @classmethod
    def default(cls, side: float = 5.0, margin: float = 0.3) -> "BoxRoom":
        lo = np.full(3, margin)
        s = side / 5.0
        boxes = [
            (lo + s * np.array([0.6, 0.6, 0.0]), lo + s * np.array([1.8, 1.4, 0.9])),
            (lo + s * np.array([3.4, 0.5, 0.0]), lo + s * np.array([4.4, 1.6, 1.8])),
            (lo + s * np.array([3.6, 3.6, 0.0]), lo + s * np.array([4.5, 4.5, 0.5])),
            (lo + s * np.array([0.5, 3.8, 0.0]), lo + s * np.array([1.1, 4.6, 2.4])),
        ]
        return cls(lo, lo + side, [(np.asarray(a), np.asarray(b)) for a, b in boxes])

    def render(self, pose: Pose, intrinsics: CameraIntrinsics) -> DepthImage:
        d = _world_rays(pose, intrinsics)
        o = np.broadcast_to(pose.translation, d.shape)
        _, t = _slab(o, d, self.room_min, self.room_max)
        for lo, hi in self.boxes:
            t_near, t_far = _slab(o, d, lo, hi)
            hit = (t_near <= t_far) & (t_near > 0)
            t = np.where(hit, np.minimum(t, t_near), t)
        t = np.where(np.isfinite(t) & (t > 0), t, 0.0)
        return DepthImage(t.reshape(intrinsics.height, intrinsics.width))

    def is_solid(self, points: np.ndarray) -> np.ndarray:
        """True for points outside the room or inside any box."""
        p = np.asarray(points)
        solid = np.any(p < self.room_min, axis=-1) | np.any(p > self.room_max, axis=-1)
        for lo, hi in self.boxes:
            solid |= np.all(p >= lo, axis=-1) & np.all(p <= hi, axis=-1)
        return solid


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def render(self, pose: Pose, intrinsics: CameraIntrinsics) -> DepthImage:
        d = _world_rays(pose, intrinsics)
        oc = pose.translation - np.asarray(self.center)
        a = np.einsum("ij,ij->i", d, d)
        b = 2.0 * d @ oc
        c = oc @ oc - self.radius ** 2
        disc = b * b - 4 * a * c
        t = np.zeros(a.shape)
        hit = disc > 0
        t_hit = (-b[hit] - np.sqrt(disc[hit])) / (2 * a[hit])
        t[hit] = np.where(t_hit > 0, t_hit, 0.0)
        return DepthImage(t.reshape(intrinsics.height, intrinsics.width))


def default_intrinsics(width: int = 80, height: int = 60, hfov_deg: float = 70.0) -> CameraIntrinsics:
    fx = 0.5 * width / np.tan(np.radians(hfov_deg) / 2)
    return CameraIntrinsics(fx, fx, width / 2, height / 2, width, height)


def orbit_poses(center, radius: float, n: int, height: float = 0.0, elevation_cycles: int = 2):
    """Cameras on a sphere-ish orbit, all looking at ``center``."""
    center = np.asarray(center, dtype=np.float64)
    poses = []
    for i in range(n):
        az = 2 * np.pi * i / n
        el = 0.6 * np.sin(elevation_cycles * 2 * np.pi * i / n)
        eye = center + radius * np.array([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)])
        eye[2] += height
        poses.append(Pose.look_at(eye, center))
    return poses


def room_trajectory(room: BoxRoom, n: int, eye_height: float = 1.4):
    """A walk along one side of the room while panning across the far side."""
    lo, hi = room.room_min, room.room_max
    side = hi - lo
    poses = []
    for i in range(n):
        s = i / max(n - 1, 1)
        eye = lo + np.array([0.25 + 0.5 * s, 0.55, 0.0]) * side
        eye[2] = lo[2] + eye_height
        yaw = np.radians(30 + 120 * s)
        pitch = np.radians(-8 + 6 * np.sin(4 * np.pi * s))
        target = eye + np.array([np.cos(yaw) * np.cos(pitch), np.sin(yaw) * np.cos(pitch), np.sin(pitch)])
        poses.append(Pose.look_at(eye, target))
    return poses


def roam_trajectory(room: BoxRoom, n: int, margin: float = 0.6, turns: int = 5):
    """A Lissajous walk through the whole room while spinning ``turns`` times.

    Spreading the views keeps the number of observations per voxel low,
    which is the regime where missing pixels decide what gets mapped.
    """
    lo = room.room_min + margin
    hi = room.room_max - margin
    poses = []
    for i in range(n):
        s = i / max(n - 1, 1)
        u = np.array([0.5 + 0.5 * np.sin(2 * np.pi * s),
                      0.5 + 0.5 * np.sin(4 * np.pi * s + 0.5),
                      0.25 + 0.2 * np.sin(6 * np.pi * s)])
        eye = lo + (hi - lo) * u
        yaw = 2 * np.pi * turns * s
        pitch = np.radians(-10 + 25 * np.sin(8 * np.pi * s))
        target = eye + np.array([np.cos(yaw) * np.cos(pitch), np.sin(yaw) * np.cos(pitch), np.sin(pitch)])
        poses.append(Pose.look_at(eye, target))
    return poses


def room_frames(room, intrinsics, poses, noise_cfg=None, hole_cfg=None, noise_scale: float = 3.0,
                unc_floor: float = 0.001, seeds=(1000, 2000, 3000), unc_scale: float = 1.0):
    """Render, degrade, punch holes and mock-complete every view.

    Frame ``i`` uses seeds ``base + i`` for noise, holes and completion, the
    same rule the command line tools follow.
    """
    from .pipeline import Frame, mock_complete
    from .sensor_models import HoleSynthConfig, KinectNoiseConfig, degrade_depth, synthesize_holes

    noise_cfg = noise_cfg or KinectNoiseConfig()
    hole_cfg = hole_cfg or HoleSynthConfig()
    frames = []
    for i, pose in enumerate(poses):
        gt = room.render(pose, intrinsics)
        raw = synthesize_holes(degrade_depth(gt, noise_cfg, seeds[0] + i), hole_cfg, seeds[1] + i)
        depth, unc = mock_complete(gt, raw, noise_scale, unc_floor, seeds[2] + i, unc_scale=unc_scale)
        frames.append(Frame(float(i), raw, pose, depth, unc, gt))
    return frames
