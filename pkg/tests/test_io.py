import numpy as np
import pytest

from ds4d import io
from ds4d.camera import orbit_camera
from ds4d.errors import IOFormatError
from ds4d.points import GaussianPointSet
from ds4d.scene import SceneSpec, default_cameras, generate_scene, render_dataset


def test_ppm_roundtrip_within_quantization(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (9, 7, 3))
    path = tmp_path / "img.ppm"
    io.write_ppm(path, img)
    back = io.read_ppm(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 1, (5, 8))
    path = tmp_path / "img.pgm"
    io.write_pgm(path, img)
    back = io.read_pgm(path)
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12


def test_quantized_image_roundtrips_exactly(tmp_path):
    img = np.arange(12).reshape(3, 4) / 255.0
    io.write_pgm(tmp_path / "q.pgm", img)
    assert np.array_equal(io.read_pgm(tmp_path / "q.pgm"), img)


def test_netpbm_bad_magic(tmp_path):
    (tmp_path / "bad.ppm").write_bytes(b"P5\n1 1\n255\n\x00")
    with pytest.raises(IOFormatError):
        io.read_ppm(tmp_path / "bad.ppm")


def test_ftr_roundtrip_float32(tmp_path):
    rng = np.random.default_rng(2)
    tokens = rng.standard_normal((3, 2, 16, 24))
    path = tmp_path / "f.ftr"
    io.write_ftr(path, tokens)
    back = io.read_ftr(path)
    assert back.shape == tokens.shape
    assert np.array_equal(back, tokens.astype(np.float32).astype(np.float64))


def test_ftr_header_layout(tmp_path):
    tokens = np.zeros((2, 3, 4, 5))
    path = tmp_path / "f.ftr"
    io.write_ftr(path, tokens)
    raw = path.read_bytes()
    assert raw[:8] == b"DS4DFTR1"
    assert np.frombuffer(raw[8:24], dtype="<u4").tolist() == [2, 3, 4, 5]
    assert len(raw) == 24 + 2 * 3 * 4 * 5 * 4


def test_ftr_truncated_rejected(tmp_path):
    tokens = np.zeros((1, 1, 4, 4))
    path = tmp_path / "f.ftr"
    io.write_ftr(path, tokens)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(IOFormatError):
        io.read_ftr(path)


def test_pts_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(3)
    n = 7
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    pts = GaussianPointSet.from_arrays(
        rng.uniform(-2, 2, (n, 3)), rng.uniform(0.01, 0.5, n), q,
        rng.uniform(0, 1, n), rng.uniform(0, 1, (n, 3)))
    path = tmp_path / "p.pts"
    io.write_pts(path, pts)
    back = io.read_pts(path)
    assert path.read_text().startswith(f"DS4DPTS1 {n}\n")
    assert np.array_equal(back.positions.data, pts.positions.data)
    assert np.array_equal(back.scales.data, pts.scales.data)
    assert np.array_equal(back.rotations.data, pts.rotations.data)
    assert np.array_equal(back.opacities.data, pts.opacities.data)
    assert np.array_equal(back.colors.data, pts.colors.data)


def test_cameras_roundtrip(tmp_path):
    cams = [orbit_camera(az, width=48, height=32) for az in (0.0, 90.0, 215.0)]
    path = tmp_path / "cameras.cfg"
    io.write_cameras(path, cams)
    back = io.read_cameras(path)
    assert len(back) == 3
    for a, b in zip(cams, back):
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.look_at, b.look_at)
        assert a.fov == b.fov
        assert (a.width, a.height) == (b.width, b.height)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    arrays = {
        "a.weight": rng.standard_normal((3, 4)),
        "b": rng.standard_normal(5),
        "c.grid": rng.standard_normal((2, 2, 3)),
    }
    path = tmp_path / "m.ckpt"
    io.write_checkpoint(path, arrays)
    assert path.read_bytes()[:9] == b"DS4DCKPT1"
    back = io.read_checkpoint(path)
    assert list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k].astype(np.float32).astype(np.float64))


def test_dataset_directory_roundtrip(tmp_path):
    scene = generate_scene(SceneSpec(n_points=20, fraction_static=0.5), seed=5)
    cams, n_train = default_cameras(2, 1, width=24, height=24)
    ds = render_dataset(scene, cams, 3, n_train_views=n_train)
    io.save_dataset(tmp_path / "data", ds, gt_points=scene.point_set_at(0.5))
    assert (tmp_path / "data" / "frames" / "0_0.ppm").exists()
    assert (tmp_path / "data" / "masks" / "2_2.pgm").exists()
    assert (tmp_path / "data" / "cameras.cfg").exists()
    assert (tmp_path / "data" / "scene_gt.pts").exists()
    back = io.load_dataset(tmp_path / "data", n_train_views=2)
    assert back.n_frames == 3 and back.n_views == 3
    assert np.abs(back.images - ds.images).max() <= 0.5 / 255 + 1e-12
    assert np.array_equal(back.masks, ds.masks)
    pos, col = io.load_gt_cloud(tmp_path / "data")
    assert pos.shape == (scene.n_points, 3)
