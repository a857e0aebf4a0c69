"""Iso-surface extraction from occupancy maps and mesh-to-mesh accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure

from ..occupancy import OccupancyOctree, logit


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def euler_characteristic(self) -> int:
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        n_verts = len(np.unique(t))
        return int(n_verts - n_edges + len(t))

    def signed_volume(self) -> float:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def write_ply(mesh: Mesh, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["ply", "format ascii 1.0", f"element vertex {len(mesh.vertices)}",
             "property float x", "property float y", "property float z",
             f"element face {len(mesh.triangles)}", "property list uchar int vertex_indices", "end_header"]
    lines += [f"{x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    path.write_text("\n".join(lines) + "\n")


def read_ply(path) -> Mesh:
    text = Path(path).read_text().splitlines()
    n_v = n_f = 0
    i = 0
    for i, line in enumerate(text):
        if line.startswith("element vertex"):
            n_v = int(line.split()[-1])
        elif line.startswith("element face"):
            n_f = int(line.split()[-1])
        elif line == "end_header":
            break
    body = text[i + 1:]
    verts = np.array([list(map(float, l.split())) for l in body[:n_v]]).reshape(-1, 3)
    faces = np.array([list(map(int, l.split()[1:4])) for l in body[n_v:n_v + n_f]]).reshape(-1, 3)
    return Mesh(verts, faces)


def _clean(verts, faces) -> Mesh:
    """Drop degenerate triangles and vertices no triangle references."""
    faces = faces[(faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])]
    m = Mesh(verts, faces)
    if len(faces):
        m.triangles = m.triangles[m.areas() > 0]
    used, inverse = np.unique(m.triangles, return_inverse=True)
    return Mesh(m.vertices[used], inverse.reshape(-1, 3))


def marching_cubes(tree: OccupancyOctree, iso: float = 0.5) -> Mesh:
    """Triangulate the ``iso`` probability surface of the finest-level log-odds field.

    Samples sit at voxel centres; cells with any unobserved corner are
    skipped. Faces are oriented with normals pointing from occupied to free.
    """
    field = tree.log_odds_grid()
    observed = ~np.isnan(field)
    # a cell is usable when all eight corners are observed
    cell = observed[:-1, :-1, :-1].copy()
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                cell &= observed[dx:dx + field.shape[0] - 1, dy:dy + field.shape[1] - 1, dz:dz + field.shape[2] - 1]
    level = logit(iso)
    if not cell.any():
        return Mesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    vals = np.where(observed, field, level)
    if not (vals[observed].min() < level < vals[observed].max()):
        return Mesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(vals, level=level, gradient_direction="ascent")
    faces = faces[_in_observed_cells(verts[faces].mean(axis=1), cell)]
    verts = np.asarray(tree.config.origin) + (verts.astype(np.float64) + 0.5) * tree.config.voxel_res
    return _clean(verts, faces.astype(np.int64))


def _in_observed_cells(centroids, cell) -> np.ndarray:
    """Whether each triangle lies in a cell whose eight corners are observed.

    Triangles only depend on their own cell's corners, so this drops exactly
    the output caused by the fill value. A centroid on a cell face counts
    for both neighbouring cells.
    """
    keep = np.zeros(len(centroids), dtype=bool)
    hi = np.array(cell.shape) - 1
    for shift in np.ndindex(2, 2, 2):
        eps = np.where(np.array(shift) == 0, -1e-6, 1e-6)
        idx = np.clip(np.floor(centroids + eps).astype(np.int64), 0, hi)
        keep |= cell[idx[:, 0], idx[:, 1], idx[:, 2]]
    return keep


def closest_point_on_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to points ``p`` (all ``(n, 3)``)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def put(mask, value):
        m = mask & ~done
        out[m] = value[m] if np.ndim(value) == 2 else value
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        put((d1 <= 0) & (d2 <= 0), a)
        put((d3 >= 0) & (d4 <= d3), b)
        put((d6 >= 0) & (d5 <= d6), c)
        v = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        w = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w2 = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w2[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v3 = (vb * denom)[:, None]
        w3 = (vc * denom)[:, None]
        put(np.ones(len(p), dtype=bool), a + ab * v3 + ac * w3)
    return out


def point_to_mesh_distance(points, mesh: Mesh) -> np.ndarray:
    """Exact distance from each point to the nearest triangle of ``mesh``.

    Candidate triangles come from a centroid k-d tree; the nearest vertex
    distance bounds the search radius so no closer triangle can be missed.
    """
    if mesh.is_empty:
        raise ValueError("empty mesh")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tri = mesh.vertices[mesh.triangles]
    centroids = tri.mean(axis=1)
    reach = np.linalg.norm(tri - centroids[:, None, :], axis=2).max()
    used = np.unique(mesh.triangles)
    d_vert, _ = cKDTree(mesh.vertices[used]).query(points)
    ctree = cKDTree(centroids)
    out = np.empty(len(points))
    for start in range(0, len(points), 2048):
        chunk = slice(start, start + 2048)
        cands = ctree.query_ball_point(points[chunk], d_vert[chunk] + reach + 1e-12)
        counts = np.array([len(c) for c in cands])
        tri_idx = np.concatenate([np.asarray(c, dtype=np.int64) for c in cands])
        pt_idx = np.repeat(np.arange(len(counts)), counts)
        p = points[chunk][pt_idx]
        q = closest_point_on_triangles(p, tri[tri_idx, 0], tri[tri_idx, 1], tri[tri_idx, 2])
        d = np.linalg.norm(p - q, axis=1)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        out[chunk] = np.minimum.reduceat(d, offsets)
    return out


def sample_surface(mesh: Mesh, n: int, seed: int = 0) -> np.ndarray:
    """Area-weighted uniform samples on the mesh surface."""
    areas = mesh.areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / total)
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    a, b, c = (mesh.vertices[mesh.triangles[tri, i]] for i in range(3))
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


def mesh_accuracy(gt_mesh: Mesh, out_mesh: Mesh, sample_count: int = 10000, seed: int = 0) -> float:
    """Mean distance from points sampled on ``gt_mesh`` to ``out_mesh``."""
    if gt_mesh.is_empty or out_mesh.is_empty:
        raise ValueError("empty mesh")
    pts = sample_surface(gt_mesh, sample_count, seed)
    return float(point_to_mesh_distance(pts, out_mesh).mean())
