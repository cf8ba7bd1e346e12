import numpy as np
import pytest

from ds4d import io
from ds4d.camera import Camera
from ds4d.errors import DomainError
from ds4d.points import GaussianPointSet
from ds4d.visualize import export_heatmap, export_scoremap, scoremap_image


def test_heatmap_all_zero_grid_black(tmp_path):
    path = tmp_path / "h.pgm"
    export_heatmap(np.zeros((4, 4)), path, out_size=16)
    img = io.read_pgm(path)
    assert img.shape == (16, 16)
    assert np.all(img == 0.0)


def test_heatmap_single_hot_cell_white_block(tmp_path):
    grid = np.zeros((4, 4))
    grid[1, 2] = 1.0
    path = tmp_path / "h.pgm"
    export_heatmap(grid, path, out_size=16)
    img = io.read_pgm(path)
    assert np.all(img[4:8, 8:12] == 1.0)
    assert img.sum() == 16.0  # exactly one 4x4 block


def test_heatmap_roundtrip_quantized(tmp_path):
    rng = np.random.default_rng(0)
    grid = rng.uniform(0, 1, (8, 8))
    path = tmp_path / "h.pgm"
    export_heatmap(grid, path, out_size=8)
    img = io.read_pgm(path)
    assert np.abs(img - grid).max() <= 0.5 / 255 + 1e-12


def test_heatmap_range_validation(tmp_path):
    with pytest.raises(DomainError):
        export_heatmap(np.full((2, 2), 1.5), tmp_path / "x.pgm")


def front_cam(size=32):
    return Camera((0, 0, 4.0), (0, 0, 0), (0, 1, 0), 0.7, size, size)


def points_at(positions, scale=0.15):
    n = len(positions)
    return GaussianPointSet.from_arrays(
        positions, np.full(n, scale), np.tile([1.0, 0, 0, 0], (n, 1)),
        np.full(n, 0.8), np.zeros((n, 3)))


def test_scoremap_uniform_weights_flat(tmp_path):
    rng = np.random.default_rng(1)
    pts = points_at(rng.uniform(-0.5, 0.5, (10, 3)))
    img = scoremap_image(np.full(10, 0.25), pts, front_cam())
    on = img[img > 0]
    assert on.max() == 1.0


def test_scoremap_single_hot_point(tmp_path):
    pts = points_at(np.array([[0.0, 0.0, 0.0], [0.4, 0.0, 0.0]]))
    scores = np.array([1.0, 0.0])
    img = scoremap_image(scores, pts, front_cam())
    u_hot = 16  # principal point
    assert img[16, 16] == 1.0
    # the zero-weight point contributes nothing
    assert img[:, 24:].max() == 0.0


def test_scoremap_matches_bruteforce_max(tmp_path):
    from ds4d.camera import camera_project
    from ds4d.render import MIN_FOOTPRINT_PX, TRUNCATION_SIGMAS

    rng = np.random.default_rng(2)
    cam = front_cam(16)
    pts = points_at(rng.uniform(-0.6, 0.6, (5, 3)), scale=0.2)
    scores = rng.uniform(0, 1, 5)
    img = scoremap_image(scores, pts, cam)

    u, v, depth, valid = camera_project(cam, pts.positions.data)
    ref = np.zeros((16, 16))
    f = cam.focal
    for iy in range(16):
        for ix in range(16):
            best = 0.0
            for k in range(5):
                if not valid[k] or not (0 <= u[k] < 16 and 0 <= v[k] < 16):
                    continue
                rho = max(pts.scales.data[k] * f / depth[k], MIN_FOOTPRINT_PX)
                d2 = (ix + 0.5 - u[k]) ** 2 + (iy + 0.5 - v[k]) ** 2
                if d2 <= (TRUNCATION_SIGMAS * rho) ** 2:
                    best = max(best, scores[k] * np.exp(-d2 / (2 * rho * rho)))
            ref[iy, ix] = best
    if ref.max() > 0:
        ref /= ref.max()
    assert np.allclose(img, ref, atol=1e-12)


def test_export_scoremap_writes_pgm(tmp_path):
    pts = points_at(np.array([[0.0, 0.0, 0.0]]))
    path = tmp_path / "s.pgm"
    export_scoremap(np.array([1.0]), pts, front_cam(), path)
    assert io.read_pgm(path).shape == (32, 32)
