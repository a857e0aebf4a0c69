import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compmap.geometry import (
    CameraIntrinsics,
    DepthImage,
    Pose,
    UncertaintyImage,
    back_project,
    project,
    transform,
)

K = CameraIntrinsics(250.0, 250.0, 160.0, 120.0, 320, 240)

unit = st.floats(-1, 1, allow_nan=False)
coord = st.floats(-10, 10, allow_nan=False)


def random_pose(rng):
    q = rng.standard_normal(4)
    return Pose(q / np.linalg.norm(q), rng.uniform(-5, 5, 3))


@st.composite
def poses(draw):
    q = np.array([draw(unit) for _ in range(4)])
    if np.linalg.norm(q) < 1e-3:
        q = np.array([0.0, 0.0, 0.0, 1.0])
    t = np.array([draw(coord) for _ in range(3)])
    return Pose(q / np.linalg.norm(q), t)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        CameraIntrinsics(1.0, 1.0, 5.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        CameraIntrinsics(1.0, 1.0, 1.0, 0.0, 4, 4)


def test_back_project_principal_point_and_unit_tangent():
    k = CameraIntrinsics(100.0, 100.0, 160.0, 120.0, 320, 240)
    np.testing.assert_allclose(back_project((k.cx, k.cy), 1.0, k), [0, 0, 1.0])
    np.testing.assert_allclose(back_project((k.cx + k.fx, k.cy), 1.0, k), [1.0, 0, 1.0])


def test_back_project_worked_pixel():
    np.testing.assert_allclose(back_project((100, 80), 2.5, K), [-0.6, -0.4, 2.5], atol=1e-12)


def test_back_project_rejects_bad_input():
    with pytest.raises(ValueError):
        back_project((100, 80), 0.0, K)
    with pytest.raises(ValueError):
        back_project((320, 10), 1.0, K)
    with pytest.raises(ValueError):
        back_project((-1, 10), 1.0, K)


def test_project_examples():
    np.testing.assert_allclose(project((0, 0, 1), K), [K.cx, K.cy])
    np.testing.assert_allclose(project((-0.6, -0.4, 2.5), K), [100, 80], atol=1e-12)
    assert project((0, 0, -1), K) is None
    assert project((1, 1, 0), K) is None


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 319.999), st.floats(0, 239.999), st.floats(0.01, 50))
def test_project_back_project_round_trip(u, v, d):
    p = back_project((u, v), d, K)
    assert p[2] == pytest.approx(d)
    np.testing.assert_allclose(project(p, K), [u, v], atol=1e-9)


def test_transform_examples():
    np.testing.assert_allclose(transform(Pose(), (1, 2, 3)), [1, 2, 3])
    np.testing.assert_allclose(transform(Pose(translation=(0, 0, 5)), (1, 2, 3)), [1, 2, 8])
    yaw = Pose((0, 0, np.sin(np.pi / 4), np.cos(np.pi / 4)))
    np.testing.assert_allclose(transform(yaw, (1, 0, 0)), [0, 1, 0], atol=1e-12)


def test_pose_requires_unit_quaternion():
    with pytest.raises(ValueError):
        Pose((0, 0, 0, 2.0))
    with pytest.raises(ValueError):
        Pose((0, 0, 0, 1.0), (np.nan, 0, 0))
    Pose((0, 0, 0, 1.0 + 5e-10))


@settings(max_examples=200, deadline=None)
@given(poses(), st.tuples(coord, coord, coord))
def test_inverse_undoes_transform(pose, p):
    back = transform(pose.inverse(), transform(pose, p))
    np.testing.assert_allclose(back, p, atol=1e-9)


def test_compose_is_associative_and_matches_matrices():
    rng = np.random.default_rng(3)
    a, b, c = (random_pose(rng) for _ in range(3))
    ab_c = a.compose(b).compose(c)
    a_bc = a.compose(b.compose(c))
    np.testing.assert_allclose(ab_c.matrix, a_bc.matrix, atol=1e-12)
    np.testing.assert_allclose(a.compose(b).matrix, a.matrix @ b.matrix, atol=1e-12)
    np.testing.assert_allclose(a.compose(a.inverse()).matrix, np.eye(4), atol=1e-12)


def test_matrix_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = random_pose(rng)
        q = Pose.from_matrix(p.matrix)
        np.testing.assert_allclose(q.matrix, p.matrix, atol=1e-12)
        assert abs(np.linalg.norm(q.rotation) - 1) < 1e-12


def test_look_at_points_optical_axis_at_target():
    eye, target = np.array([1.0, 2.0, 1.5]), np.array([4.0, -1.0, 0.5])
    pose = Pose.look_at(eye, target)
    cam = transform(pose.inverse(), target)
    assert cam[2] > 0
    np.testing.assert_allclose(cam[:2], 0, atol=1e-12)
    # image "down" (+y) points to smaller world z
    assert pose.rotation_matrix[:, 1][2] < 0
    with pytest.raises(ValueError):
        Pose.look_at((0, 0, 0), (0, 0, 1))


def test_pixel_rays_match_back_project():
    k = CameraIntrinsics(20.0, 22.0, 5.5, 3.5, 12, 8)
    rays = k.pixel_rays()
    assert rays.shape == (8, 12, 3)
    np.testing.assert_allclose(rays[3, 7], back_project((7, 3), 1.0, k))


def test_depth_image_contract():
    img = DepthImage(np.array([[0.0, 1.5], [2.0, 0.0]]))
    assert (img.width, img.height, img.shape) == (2, 2, (2, 2))
    np.testing.assert_array_equal(img.valid, [[False, True], [True, False]])
    with pytest.raises(ValueError):
        img.values[0, 0] = 3.0
    for bad in ([[-1.0]], [[np.inf]], [1.0, 2.0]):
        with pytest.raises(ValueError):
            DepthImage(np.array(bad))


def test_uncertainty_image_must_match_depth():
    d = DepthImage(np.ones((2, 3)))
    UncertaintyImage(np.ones((2, 3)), d)
    with pytest.raises(ValueError):
        UncertaintyImage(np.ones((3, 2)), d)
