import numpy as np
import pytest

import oracles
from compmap import _raycast
from compmap.geometry import CameraIntrinsics, DepthImage, Pose, UncertaintyImage
from compmap.occupancy import MapConfig, OccupancyOctree
from compmap.sensor_models import SurfaceThicknessConfig, surface_thickness

GRID_ORIGIN = np.array([-0.013, 0.007, -0.021])
RES = 0.1
SIZE = 16


def random_unit(rng):
    d = rng.standard_normal(3)
    return d / np.linalg.norm(d)


def test_traverse_matches_slab_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        o = GRID_ORIGIN + rng.uniform(-0.3, SIZE * RES + 0.3, 3)
        d = random_unit(rng)
        t_end = rng.uniform(0.05, 2.5)
        got = [tuple(v) for v in _raycast.traverse(o, d, t_end, GRID_ORIGIN, RES, SIZE)]
        assert len(got) == len(set(got)), "voxel visited twice"
        strict = oracles.segment_voxels(o, d, t_end, GRID_ORIGIN, RES, SIZE, min_overlap=1e-9)
        loose = oracles.segment_voxels(o, d, t_end, GRID_ORIGIN, RES, SIZE, min_overlap=-1e-9)
        assert set(strict) <= set(got) <= set(loose)


def test_traverse_visits_neighbours_in_order():
    rng = np.random.default_rng(1)
    for _ in range(100):
        o = GRID_ORIGIN + rng.uniform(0, SIZE * RES, 3)
        path = _raycast.traverse(o, random_unit(rng), 3.0, GRID_ORIGIN, RES, SIZE)
        steps = np.abs(np.diff(path, axis=0)).sum(axis=1)
        assert np.all(steps == 1)


def test_axis_aligned_ray():
    o = GRID_ORIGIN + np.array([0.05, 0.05, 0.05])
    path = _raycast.traverse(o, np.array([1.0, 0.0, 0.0]), 0.52, GRID_ORIGIN, RES, SIZE)
    np.testing.assert_array_equal(path, [[i, 0, 0] for i in range(6)])


def test_ray_missing_the_grid_is_empty():
    o = GRID_ORIGIN - 1.0
    assert _raycast.traverse(o, np.array([-1.0, 0, 0]), 5.0, GRID_ORIGIN, RES, SIZE).shape == (0, 3)


def _frame_setup(rng, w=9, h=7):
    k = CameraIntrinsics(8.0, 8.0, w / 2 - 0.3, h / 2 + 0.2, w, h)
    eye = GRID_ORIGIN + np.array([0.4, 0.5, 0.6]) + rng.uniform(0, 0.2, 3)
    pose = Pose.look_at(eye, eye + np.array([1.0, 0.8, 0.3]) + rng.uniform(-0.2, 0.2, 3))
    z = rng.uniform(0.3, 1.2, (h, w))
    z[rng.random(z.shape) < 0.15] = 0.0
    sigma = np.where(z > 0, rng.uniform(0.005, 0.05, z.shape), 0.0)
    free_only = rng.random(z.shape) < 0.3
    return k, pose, DepthImage(z), UncertaintyImage(sigma), free_only


@pytest.mark.parametrize("seed", range(6))
def test_frame_samples_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    cfg = MapConfig(SIZE * RES, RES, origin=tuple(GRID_ORIGIN))
    tree = OccupancyOctree(cfg)
    tau_cfg = SurfaceThicknessConfig(0.1, 0.06, 0.3)
    k, pose, depth, unc, free_only = _frame_setup(rng)
    vox, samples, _, _ = tree.frame_samples(depth, unc, pose, k, free_only, tau_cfg)

    valid = depth.values > 0
    rays = k.pixel_rays()[valid]
    norms = np.linalg.norm(rays, axis=1)
    dirs = (rays / norms[:, None]) @ pose.rotation_matrix.T
    z_r = depth.values[valid] * norms
    ism = tree.ism
    ref = oracles.frame_samples(pose.translation, dirs, z_r, unc.values[valid], surface_thickness(z_r, tau_cfg),
                                free_only[valid], GRID_ORIGIN, RES, SIZE, ism.l_min, ism.l_max, ism.sigma_scale)
    got = {}
    for v, s in zip(vox, samples):
        i, rest = divmod(int(v), SIZE * SIZE)
        got[(i, *divmod(rest, SIZE))] = s
    solid = {key for key, (_, _, overlap) in ref.items() if overlap > 1e-9}
    assert solid <= set(got) <= set(ref)
    for key in got:
        assert got[key] == pytest.approx(ref[key][0], abs=1e-12)


def test_free_only_rays_stop_before_the_ramp():
    cfg = MapConfig(SIZE * RES, RES, origin=tuple(GRID_ORIGIN))
    tree = OccupancyOctree(cfg)
    k = CameraIntrinsics(8.0, 8.0, 2.5, 2.5, 5, 5)
    pose = Pose.look_at(GRID_ORIGIN + 0.05, GRID_ORIGIN + 1.0)
    depth = DepthImage(np.full((5, 5), 1.0))
    unc = UncertaintyImage(np.full((5, 5), 0.02))
    vox, samples, _, _ = tree.frame_samples(depth, unc, pose, k, np.ones((5, 5), bool))
    assert vox.size > 0
    assert np.all(samples == tree.ism.l_min)
