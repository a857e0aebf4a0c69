"""Pinhole camera model, rigid poses and depth image containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by ``factor`` in both axes."""
        return CameraIntrinsics(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            int(round(self.width * factor)),
            int(round(self.height * factor)),
        )

    def pixel_rays(self) -> np.ndarray:
        """Camera-frame rays with unit z for every pixel, shape (H, W, 3)."""
        u, v = np.meshgrid(np.arange(self.width, dtype=np.float64),
                           np.arange(self.height, dtype=np.float64))
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = (u - self.cx) / self.fx
        rays[..., 1] = (v - self.cy) / self.fy
        rays[..., 2] = 1.0
        return rays


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _matrix_to_quat(R: np.ndarray) -> np.ndarray:
    # Shepperd's method, branch on the largest diagonal term
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
             (R[1, 0] - R[0, 1]) / s, 0.25 * s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s,
             (R[2, 1] - R[1, 2]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s,
             (R[0, 2] - R[2, 0]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s,
             (R[1, 0] - R[0, 1]) / s]
    q = np.asarray(q)
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform.

    The rotation is a unit quaternion in ``(qx, qy, qz, qw)`` order, the same
    order TUM trajectory files use.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("rotation quaternion must have unit norm")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls(_matrix_to_quat(T[:3, :3]), T[:3, 3].copy())

    @classmethod
    def from_rotation_translation(cls, R, t) -> "Pose":
        return cls(_matrix_to_quat(np.asarray(R, dtype=np.float64)), np.asarray(t, dtype=np.float64))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "Pose":
        """Pose of a camera at ``eye`` whose optical axis points at ``target``.

        Camera axes follow the usual vision convention: x right, y down, z forward.
        """
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            raise ValueError("up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.column_stack([right, down, fwd])
        return cls.from_rotation_translation(R, eye)

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = _quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    @property
    def rotation_matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.rotation)

    def inverse(self) -> "Pose":
        q = self.rotation
        q_inv = np.array([-q[0], -q[1], -q[2], q[3]])
        R_inv = _quat_to_matrix(q_inv)
        return Pose(q_inv, -R_inv @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """``self * other``: apply ``other`` first, then ``self``."""
        x1, y1, z1, w1 = self.rotation
        x2, y2, z2, w2 = other.rotation
        q = np.array([
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ])
        q /= np.linalg.norm(q)
        return Pose(q, self.rotation_matrix @ other.translation + self.translation)


def transform(pose: Pose, point) -> np.ndarray:
    """Apply ``pose`` to one point or an ``(N, 3)`` array of points."""
    p = np.asarray(point, dtype=np.float64)
    return p @ pose.rotation_matrix.T + pose.translation


def back_project(pixel, depth: float, intrinsics: CameraIntrinsics) -> np.ndarray:
    u, v = float(pixel[0]), float(pixel[1])
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        raise ValueError(f"pixel {pixel} lies outside the image")
    return np.array([
        (u - intrinsics.cx) / intrinsics.fx * depth,
        (v - intrinsics.cy) / intrinsics.fy * depth,
        depth,
    ])


def project(point, intrinsics: CameraIntrinsics):
    """Pinhole projection; returns ``None`` for points at or behind the camera."""
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= 0:
        return None
    return np.array([intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy])


def _check_image(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(values < 0):
        raise ValueError(f"{name} contains negative values")
    values = values.copy()
    values.setflags(write=False)
    return values


class DepthImage:
    """Per-pixel z-depth in metres; exactly 0.0 marks an invalid pixel."""

    def __init__(self, values):
        self.values = _check_image(values, "depth")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __repr__(self):
        return f"{type(self).__name__}({self.width}x{self.height})"


class UncertaintyImage(DepthImage):
    """Per-pixel depth standard deviation in metres."""

    def __init__(self, values, depth: DepthImage | None = None):
        self.values = _check_image(values, "uncertainty")
        if depth is not None and depth.shape != self.shape:
            raise ValueError("uncertainty and depth dimensions differ")
