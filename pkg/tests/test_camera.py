import numpy as np
import pytest

from ds4d.camera import Camera, camera_project, in_frame, orbit_camera
from ds4d.errors import DomainError


def _front_cam(size=64):
    # focal = (size/2) / tan(fov/2); fov = pi/2 gives focal = size/2
    return Camera((0.0, 0.0, 5.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0),
                  np.pi / 2, size, size)


def test_point_on_optical_axis_hits_principal_point():
    cam = _front_cam()
    u, v, depth, valid = camera_project(cam, np.array([0.0, 0.0, 0.0]))
    assert valid
    assert (u, v) == (32.0, 32.0)
    assert depth == pytest.approx(5.0)


def test_point_behind_camera_is_invalid():
    cam = _front_cam()
    _, _, _, valid = camera_project(cam, np.array([0.0, 0.0, 9.0]))
    assert not valid


def test_point_at_camera_origin_is_invalid_without_throw():
    cam = _front_cam()
    _, _, _, valid = camera_project(cam, np.array([0.0, 0.0, 5.0]))
    assert not valid


def test_off_axis_point_matches_similar_triangles():
    cam = _front_cam()
    # Point (1, 0.5, 0): camera axes are right=+x, down=-y, depth 5,
    # focal 32, so u = 32 + 32*1/5 and v = 32 - 32*0.5/5.
    u, v, depth, valid = camera_project(cam, np.array([1.0, 0.5, 0.0]))
    assert valid
    assert u == pytest.approx(32 + 32 * 1.0 / 5.0, abs=1e-12)
    assert v == pytest.approx(32 - 32 * 0.5 / 5.0, abs=1e-12)
    assert depth == pytest.approx(5.0)


def test_batch_projection_matches_scalar():
    cam = orbit_camera(30.0)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (10, 3))
    u, v, d, ok = camera_project(cam, pts)
    for k in range(10):
        uu, vv, dd, oo = camera_project(cam, pts[k])
        assert oo == ok[k]
        assert np.allclose([uu, vv, dd], [u[k], v[k], d[k]], rtol=1e-12)


def test_fov_out_of_range_rejected():
    with pytest.raises(DomainError):
        Camera((0, 0, 1), (0, 0, 0), (0, 1, 0), 0.0, 8, 8)
    with pytest.raises(DomainError):
        Camera((0, 0, 1), (0, 0, 0), (0, 1, 0), np.pi, 8, 8)


def test_zero_look_direction_rejected():
    with pytest.raises(DomainError):
        Camera((1, 2, 3), (1, 2, 3), (0, 1, 0), 0.7, 8, 8)


def test_in_frame_rule():
    cam = _front_cam(8)
    pts = np.array([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0], [0.0, 0.0, 9.0]])
    u, v, d, ok = camera_project(cam, pts)
    inside = in_frame(cam, u, v, ok)
    assert inside.tolist() == [True, False, False]
