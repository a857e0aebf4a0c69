"""Multi-resolution occupancy octree with log-odds fusion.

Each voxel stores a running mean of inverse-sensor-model log-odds samples and
an integration weight. The occupancy log-odds used for probabilities and
classification is ``mean * weight``, so repeated consistent observations
drive a voxel towards certainty while the mean itself stays inside
``[l_min, l_max]``.

Binary format (little endian)::

    magic     8 bytes   b"CMOCTREE"
    version   uint32    1
    map_dim, voxel_res, max_weight(float64 x3), origin (float64 x3)
    l_min, l_max, sigma_scale (float64 x3)
    n_nodes, n_leaves     uint64 x2
    flags     uint8[n_nodes]     depth-first pre-order, 1 = interior, 0 = leaf
    means     float64[n_leaves]  leaf payloads in the same order
    weights   int32[n_leaves]
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _octree, _raycast
from ._kernels import fuse_scalar
from .geometry import CameraIntrinsics, DepthImage, Pose, UncertaintyImage
from .sensor_models import InverseSensorModelConfig, SurfaceThicknessConfig, surface_thickness

MAGIC = b"CMOCTREE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sI9d2Q")


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def sigmoid(l):
    return 1.0 / (1.0 + np.exp(-np.asarray(l, dtype=np.float64)))


@dataclass(frozen=True)
class MapConfig:
    """Cubic map volume.

    The grid has ``size`` voxels per side, the power of two covering
    ``map_dim / voxel_res`` (ratios within 1% above a power of two round down
    to it, so 15 m at 0.0146 m gives 1024).
    """

    map_dim: float = 5.0
    voxel_res: float = 5.0 / 128
    max_weight: int = 100
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.voxel_res > 0 or not self.map_dim > 0:
            raise ValueError("map_dim and voxel_res must be positive")
        if self.max_weight < 1:
            raise ValueError("max_weight must be at least 1")
        if self.depth > 20:
            raise ValueError("map_dim / voxel_res exceeds the supported octree depth")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "max_weight", int(self.max_weight))

    @property
    def depth(self) -> int:
        ratio = self.map_dim / self.voxel_res
        return max(0, math.ceil(math.log2(ratio) - math.log2(1.01)))

    @property
    def size(self) -> int:
        return 1 << self.depth

    @property
    def extent(self) -> float:
        return self.size * self.voxel_res

    @property
    def voxel_volume(self) -> float:
        return self.voxel_res ** 3


@dataclass
class VoxelData:
    log_odds_mean: float = 0.0
    weight: int = 0

    @property
    def observed(self) -> bool:
        return self.weight > 0

    @property
    def log_odds(self) -> float:
        return self.log_odds_mean * self.weight


class OccupancyClass(enum.Enum):
    FREE = "free"
    OCCUPIED = "occupied"
    UNKNOWN = "unknown"


def fuse_sample(voxel: VoxelData, sample: float, cfg: MapConfig,
                ism: InverseSensorModelConfig = InverseSensorModelConfig()) -> VoxelData:
    if not np.isfinite(sample):
        raise ValueError("sample must be finite")
    m, w = fuse_scalar(voxel.log_odds_mean, voxel.weight, sample, ism.l_min, ism.l_max, cfg.max_weight)
    return VoxelData(float(m), int(w))


def classify_log_odds(log_odds, observed, free_threshold: float):
    """Vectorised classification; returns an int8 array (0 free, 1 occupied, 2 unknown)."""
    log_odds = np.asarray(log_odds)
    observed = np.asarray(observed, dtype=bool)
    out = np.full(log_odds.shape, 2, dtype=np.int8)
    out[observed & (log_odds < logit(free_threshold))] = 0
    out[observed & (log_odds >= 0.0)] = 1
    return out


_CLASS_CODES = (OccupancyClass.FREE, OccupancyClass.OCCUPIED, OccupancyClass.UNKNOWN)


@dataclass
class IntegrationStats:
    rays_cast: int = 0
    samples: int = 0
    voxels_updated: int = 0
    node_updates: int = 0


class OccupancyOctree:
    def __init__(self, config: MapConfig = MapConfig(),
                 ism: InverseSensorModelConfig = InverseSensorModelConfig(),
                 capacity: int = 1 << 12):
        self.config = config
        self.ism = ism
        self._alloc(max(capacity, 16))
        self._state[_octree.USED] = 1
        self._leaf_init(0)

    # -- node pool -------------------------------------------------------
    def _alloc(self, cap):
        self._child = np.full(cap, -1, dtype=np.int32)
        self._mean = np.zeros(cap)
        self._weight = np.zeros(cap, dtype=np.int32)
        self._fmin = np.full(cap, np.inf)
        self._fmax = np.full(cap, -np.inf)
        self._allobs = np.zeros(cap, dtype=np.bool_)
        self._dirty = np.zeros(cap, dtype=np.uint8)
        self._free_blocks = np.zeros(cap // 8 + 1, dtype=np.int64)
        self._state = np.zeros(2, dtype=np.int64)

    def _grow(self):
        old = (self._child, self._mean, self._weight, self._fmin, self._fmax,
               self._allobs, self._dirty, self._free_blocks)
        state = self._state
        n = old[0].size
        self._alloc(2 * n)
        for new, arr in zip((self._child, self._mean, self._weight, self._fmin, self._fmax,
                             self._allobs, self._dirty, self._free_blocks), old):
            new[:arr.size] = arr
        self._state = state

    def _leaf_init(self, n):
        self._child[n] = -1
        self._mean[n] = 0.0
        self._weight[n] = 0
        self._fmin[n] = np.inf
        self._fmax[n] = -np.inf
        self._allobs[n] = False

    @property
    def node_count(self) -> int:
        return int(self._state[_octree.USED] - 8 * self._state[_octree.NFREE])

    @property
    def depth(self) -> int:
        return self.config.depth

    @property
    def size(self) -> int:
        return self.config.size

    # -- updates ---------------------------------------------------------
    def apply_voxel_samples(self, vox: np.ndarray, samples: np.ndarray) -> int:
        """Fuse one sample into each listed voxel.

        ``vox`` holds linear finest-level indices ``(x*size + y)*size + z``
        and must not repeat. Sibling groups that receive identical samples
        are fused once at the coarsest level they fill completely. Returns
        the number of node updates performed.
        """
        vox = np.ascontiguousarray(vox, dtype=np.int64)
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if vox.size == 0:
            return 0
        codes = _octree.linear_to_morton(vox, self.size, self.depth)
        order = np.argsort(codes, kind="stable")
        codes, levels, samp = _octree.build_pyramid(codes[order], samples[order], self.depth)
        start = 0
        while start < codes.size:
            start = _octree.apply_updates(
                self._child, self._mean, self._weight, self._dirty, self._free_blocks,
                self._state, codes, levels, samp, start, self.depth,
                self.ism.l_min, self.ism.l_max, self.config.max_weight)
            if start < codes.size:
                self._grow()
        _octree.refresh(self._child, self._mean, self._weight, self._fmin, self._fmax,
                        self._allobs, self._dirty, self._free_blocks, self._state, self.depth)
        return int(codes.size)

    def frame_samples(self, depth: DepthImage, unc: UncertaintyImage, pose: Pose,
                      intrinsics: CameraIntrinsics, free_only_mask=None,
                      tau_cfg: SurfaceThicknessConfig = SurfaceThicknessConfig()):
        """Per-voxel samples one frame would contribute, before fusion.

        Returns ``(vox, samples, n_rays, n_candidates)`` with ``vox`` sorted
        linear voxel indices.
        """
        z = np.asarray(depth.values)
        sig = np.asarray(unc.values)
        if z.shape != sig.shape or z.shape != (intrinsics.height, intrinsics.width):
            raise ValueError("depth, uncertainty and intrinsics dimensions disagree")
        if free_only_mask is None:
            free_only_mask = np.zeros(z.shape, dtype=bool)
        free_only_mask = np.asarray(free_only_mask, dtype=bool)
        if free_only_mask.shape != z.shape:
            raise ValueError("free_only_mask dimensions disagree with depth")
        if not isinstance(pose, Pose):
            raise TypeError("pose must be a Pose")

        valid = z > 0
        rays = intrinsics.pixel_rays()[valid]
        norms = np.linalg.norm(rays, axis=1)
        dirs = (rays / norms[:, None]) @ pose.rotation_matrix.T
        z_r = z[valid] * norms
        sigma = sig[valid]
        if np.any(sigma <= 0):
            raise ValueError("uncertainty must be positive wherever depth is valid")
        tau = surface_thickness(z_r, tau_cfg)
        free_only = free_only_mask[valid]
        free_end = z_r - self.ism.sigma_scale * sigma
        r_end = np.where(free_only, free_end, z_r + tau)
        free_limit = np.where(free_only, free_end, np.inf)
        keep = r_end > 0
        dirs, z_r, sigma, tau = dirs[keep], z_r[keep], sigma[keep], tau[keep]
        r_end, free_limit = r_end[keep], free_limit[keep]
        n_rays = int(dirs.shape[0])
        if n_rays == 0:
            return np.empty(0, dtype=np.int64), np.empty(0), 0, 0
        vox, samples, dist2, ray_id = _raycast.cast_rays(
            np.asarray(pose.translation, dtype=np.float64), np.ascontiguousarray(dirs),
            z_r, np.ascontiguousarray(sigma), tau, r_end, free_limit,
            np.asarray(self.config.origin, dtype=np.float64), self.config.voxel_res,
            self.size, self.ism.l_min, self.ism.l_max, self.ism.sigma_scale)
        uv, us = _raycast.nearest_ray_samples(vox, samples, dist2, ray_id)
        return uv, us, n_rays, int(vox.size)

    def integrate_frame(self, depth: DepthImage, unc: UncertaintyImage, pose: Pose,
                        intrinsics: CameraIntrinsics, free_only_mask=None,
                        tau_cfg: SurfaceThicknessConfig = SurfaceThicknessConfig()) -> IntegrationStats:
        """Fuse one depth image with per-pixel standard deviations.

        Every valid pixel casts a ray up to ``z_r + tau(z_r)``; pixels in
        ``free_only_mask`` stop at the start of the surface ramp and only
        carve free space. A voxel crossed by several rays in the same frame
        takes the sample of the ray passing closest to its centre.
        """
        vox, samples, n_rays, n_cand = self.frame_samples(depth, unc, pose, intrinsics,
                                                         free_only_mask, tau_cfg)
        n_nodes = self.apply_voxel_samples(vox, samples)
        return IntegrationStats(n_rays, n_cand, int(vox.size), n_nodes)

    # -- queries ---------------------------------------------------------
    def voxel_index(self, point) -> tuple[int, int, int]:
        p = (np.asarray(point, dtype=np.float64) - np.asarray(self.config.origin)) / self.config.voxel_res
        idx = np.floor(p).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise ValueError(f"point {point} lies outside the map")
        return tuple(int(i) for i in idx)

    def voxel_center(self, index) -> np.ndarray:
        return np.asarray(self.config.origin) + (np.asarray(index, dtype=np.float64) + 0.5) * self.config.voxel_res

    def voxel(self, index) -> VoxelData:
        x, y, z = (int(i) for i in index)
        if not all(0 <= i < self.size for i in (x, y, z)):
            raise IndexError(f"voxel index {index} outside the grid")
        code = _octree.morton_encode(x, y, z, self.depth)
        node, _ = _octree.lookup(self._child, code, self.depth)
        return VoxelData(float(self._mean[node]), int(self._weight[node]))

    def occupancy_probability(self, point):
        """Occupancy probability at a world point, or ``None`` if unobserved."""
        v = self.voxel(self.voxel_index(point))
        if not v.observed:
            return None
        return float(sigmoid(v.log_odds))

    def classify(self, index, free_threshold: float = 0.0004) -> OccupancyClass:
        v = self.voxel(index)
        return _CLASS_CODES[int(classify_log_odds(v.log_odds, v.observed, free_threshold))]

    def free_voxel_count(self, free_threshold: float = 0.0004) -> int:
        return int(_octree.free_count(self._child, self._fmin, self._fmax, self._allobs,
                                      self.depth, logit(free_threshold)))

    def free_space_volume(self, free_threshold: float = 0.0004) -> float:
        return self.free_voxel_count(free_threshold) * self.config.voxel_volume

    def leaves(self):
        """Iterate ``(origin_index, level, VoxelData)`` for every leaf."""
        stack = [(0, self.depth, (0, 0, 0))]
        while stack:
            n, level, org = stack.pop()
            first = self._child[n]
            if first < 0:
                yield org, level, VoxelData(float(self._mean[n]), int(self._weight[n]))
                continue
            h = 1 << (level - 1)
            for k in range(7, -1, -1):
                stack.append((first + k, level - 1,
                              (org[0] + (k & 1) * h, org[1] + ((k >> 1) & 1) * h, org[2] + ((k >> 2) & 1) * h)))

    def to_dense(self):
        """``(mean, weight)`` arrays over the full finest grid; small maps only."""
        mean = np.zeros((self.size,) * 3)
        weight = np.zeros((self.size,) * 3, dtype=np.int32)
        _octree.fill_dense(self._child, self._mean, self._weight, self.depth, self.size, mean, weight)
        return mean, weight

    def log_odds_grid(self):
        """Dense occupancy log-odds with NaN where unobserved."""
        mean, weight = self.to_dense()
        out = mean * weight
        out[weight == 0] = np.nan
        return out

    def slice_image(self, axis, coordinate: float) -> np.ndarray:
        """Occupancy probabilities on the voxel plane through ``coordinate``.

        ``axis`` is 0/1/2 or "x"/"y"/"z"; the image is indexed by the two
        remaining axes in increasing order. Unknown voxels are NaN.
        """
        a = {"x": 0, "y": 1, "z": 2}.get(axis, axis)
        if a not in (0, 1, 2):
            raise ValueError(f"invalid axis {axis!r}")
        k = math.floor((coordinate - self.config.origin[a]) / self.config.voxel_res)
        if not 0 <= k < self.size:
            raise ValueError(f"coordinate {coordinate} outside the map along axis {a}")
        mean = np.zeros((self.size, self.size))
        weight = np.zeros((self.size, self.size), dtype=np.int32)
        _octree.fill_slice(self._child, self._mean, self._weight, self.depth, a, k, mean, weight)
        prob = sigmoid(mean * weight)
        prob[weight == 0] = np.nan
        return prob

    def audit(self) -> int:
        """Number of cache or invariant violations found by a full traversal."""
        return int(_octree.audit(self._child, self._mean, self._weight, self._fmin, self._fmax,
                                 self._allobs, self.depth, self.ism.l_min, self.ism.l_max,
                                 self.config.max_weight))

    def is_empty(self) -> bool:
        return self._child[0] < 0 and self._weight[0] == 0

    # -- serialization ---------------------------------------------------
    def to_bytes(self) -> bytes:
        flags, means, weights = _octree.preorder(self._child, self._mean, self._weight, self.depth)
        c, m = self.config, self.ism
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, c.map_dim, c.voxel_res, float(c.max_weight),
                              *c.origin, m.l_min, m.l_max, m.sigma_scale, flags.size, means.size)
        return b"".join([header, flags.astype("<u1").tobytes(), means.astype("<f8").tobytes(),
                         weights.astype("<i4").tobytes()])

    @classmethod
    def from_bytes(cls, data: bytes) -> "OccupancyOctree":
        if len(data) < _HEADER.size:
            raise ValueError("truncated map file")
        magic, version, dim, res, maxw, ox, oy, oz, l_min, l_max, ss, n_nodes, n_leaves = \
            _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError("not a map file")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported map format version {version}")
        off = _HEADER.size
        if len(data) != off + n_nodes + 12 * n_leaves:
            raise ValueError("map file length does not match its header")
        flags = np.frombuffer(data, dtype="<u1", count=n_nodes, offset=off)
        off += n_nodes
        means = np.frombuffer(data, dtype="<f8", count=n_leaves, offset=off).astype(np.float64)
        off += 8 * n_leaves
        weights = np.frombuffer(data, dtype="<i4", count=n_leaves, offset=off).astype(np.int32)
        tree = cls(MapConfig(dim, res, int(maxw), (ox, oy, oz)),
                   InverseSensorModelConfig(l_min, l_max, ss), capacity=max(16, int(n_nodes) + 8))
        ok = _octree.from_preorder(np.ascontiguousarray(flags), means, weights, tree._child,
                                   tree._mean, tree._weight, tree._dirty, tree._state)
        if not ok:
            raise ValueError("corrupt node records")
        _octree.refresh(tree._child, tree._mean, tree._weight, tree._fmin, tree._fmax,
                        tree._allobs, tree._dirty, tree._free_blocks, tree._state, tree.depth)
        return tree

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "OccupancyOctree":
        return cls.from_bytes(Path(path).read_bytes())

    def same_config(self, other: "OccupancyOctree") -> bool:
        return self.config == other.config and self.ism == other.ism
