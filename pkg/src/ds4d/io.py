"""File formats: PPM/PGM images, feature tensors, point sets, cameras,
checkpoints, and training logs. Everything round-trips bit-exactly up to
the stated quantization (8-bit for images, float32 for features and
checkpoints, full text precision elsewhere).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .camera import Camera
from .errors import IOFormatError
from .points import GaussianPointSet

FTR_MAGIC = b"DS4DFTR1"
PTS_MAGIC = "DS4DPTS1"
CKPT_MAGIC = b"DS4DCKPT1"

LOG_HEADER = "iter,loss_total,loss_rec,loss_mask,loss_proxy,lr,num_points"


# -- PPM / PGM ------------------------------------------------------------------


def write_ppm(path, image: np.ndarray) -> None:
    """Binary PPM (P6) from a float image in [0, 1]."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise IOFormatError(f"PPM needs an (h, w, 3) image, got {img.shape}")
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM (P5) from a float image in [0, 1]."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise IOFormatError(f"PGM needs an (h, w) image, got {img.shape}")
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(magic):
        raise IOFormatError(f"{path}: expected {magic.decode()} header")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    count = w * h * channels
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=pos)
    shape = (h, w, channels) if channels > 1 else (h, w)
    return data.reshape(shape).astype(np.float64) / maxval


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6", 3)


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5", 1)


# -- feature tensors ----------------------------------------------------------------


def write_ftr(path, tokens: np.ndarray) -> None:
    """Feature tensor: magic, u32 (t, v, P, width) LE, then f32 LE data in
    (frame, view, token, channel) order."""
    arr = np.asarray(tokens, dtype=np.float64)
    if arr.ndim != 4:
        raise IOFormatError(f"feature tensor must be (t, v, P, width), got {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(FTR_MAGIC)
        fh.write(struct.pack("<4I", *arr.shape))
        fh.write(arr.astype("<f4").tobytes())


def read_ftr(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(FTR_MAGIC))
        if magic != FTR_MAGIC:
            raise IOFormatError(f"{path}: bad feature-file magic {magic!r}")
        t, v, p, d = struct.unpack("<4I", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != t * v * p * d:
        raise IOFormatError(f"{path}: expected {t*v*p*d} floats, found {data.size}")
    return data.reshape(t, v, p, d).astype(np.float64)


# -- point sets ------------------------------------------------------------------


def write_pts(path, points: GaussianPointSet) -> None:
    """Text point file: header line, then one point per line."""
    n = len(points)
    with open(path, "w") as fh:
        fh.write(f"{PTS_MAGIC} {n}\n")
        cols = np.concatenate([
            points.positions.data,
            points.scales.data[:, None],
            points.rotations.data,
            points.opacities.data[:, None],
            points.colors.data,
        ], axis=1)
        for row in cols:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_pts(path) -> GaussianPointSet:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != PTS_MAGIC:
            raise IOFormatError(f"{path}: bad point-file header")
        n = int(header[1])
        rows = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if rows.shape != (n, 12):
        raise IOFormatError(f"{path}: expected {n} x 12 values, got {rows.shape}")
    return GaussianPointSet.from_arrays(
        rows[:, 0:3], rows[:, 3], rows[:, 4:8], rows[:, 8], rows[:, 9:12])


# -- cameras ------------------------------------------------------------------


def write_cameras(path, cameras: list[Camera]) -> None:
    with open(path, "w") as fh:
        fh.write(f"width = {cameras[0].width}\n")
        fh.write(f"height = {cameras[0].height}\n")
        for j, cam in enumerate(cameras):
            fh.write(f"cam{j}.pos = " + " ".join(f"{x:.17g}" for x in cam.position) + "\n")
            fh.write(f"cam{j}.lookat = " + " ".join(f"{x:.17g}" for x in cam.look_at) + "\n")
            fh.write(f"cam{j}.up = " + " ".join(f"{x:.17g}" for x in cam.up) + "\n")
            fh.write(f"cam{j}.fov = {cam.fov:.17g}\n")


def read_cameras(path) -> list[Camera]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise IOFormatError(f"{path}: malformed line {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            pairs[key] = value
    try:
        width = int(pairs.pop("width"))
        height = int(pairs.pop("height"))
    except KeyError as exc:
        raise IOFormatError(f"{path}: missing {exc.args[0]}") from None
    cams = []
    j = 0
    while f"cam{j}.pos" in pairs:
        def vec(key):
            return tuple(float(x) for x in pairs[key].split())
        cams.append(Camera(vec(f"cam{j}.pos"), vec(f"cam{j}.lookat"),
                           vec(f"cam{j}.up"), float(pairs[f"cam{j}.fov"]),
                           width, height))
        j += 1
    if not cams:
        raise IOFormatError(f"{path}: no cameras found")
    return cams


# -- checkpoints ------------------------------------------------------------------


def write_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    """Named float32 arrays with shapes, in insertion order."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode()
            arr = np.asarray(arr)
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f4").tobytes())


def read_checkpoint(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise IOFormatError(f"{path}: bad checkpoint magic")
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(4 * size), dtype="<f4")
            out[name] = data.reshape(shape).astype(np.float64)
    return out


# -- dataset directory layout ---------------------------------------------------------


def save_dataset(dirpath, dataset, gt_points: GaussianPointSet | None = None) -> None:
    """Documented layout: frames/{i}_{j}.ppm, masks/{i}_{j}.pgm,
    cameras.cfg, scene_gt.pts."""
    root = Path(dirpath)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for i in range(dataset.n_frames):
        for j in range(dataset.n_views):
            write_ppm(root / "frames" / f"{i}_{j}.ppm", dataset.images[i, j])
            write_pgm(root / "masks" / f"{i}_{j}.pgm", dataset.masks[i, j])
    write_cameras(root / "cameras.cfg", dataset.cameras)
    if gt_points is not None:
        write_pts(root / "scene_gt.pts", gt_points)


def load_dataset(dirpath, n_train_views: int | None = None):
    from .scene import SceneDataset

    root = Path(dirpath)
    cameras = read_cameras(root / "cameras.cfg")
    frame_files = sorted((root / "frames").glob("*_*.ppm"))
    if not frame_files:
        raise IOFormatError(f"{dirpath}: no frames found")
    indices = [tuple(int(x) for x in f.stem.split("_")) for f in frame_files]
    n_frames = max(i for i, _ in indices) + 1
    n_views = max(j for _, j in indices) + 1
    if n_views != len(cameras):
        raise IOFormatError(
            f"{dirpath}: {n_views} views on disk but {len(cameras)} cameras")
    h, w = cameras[0].height, cameras[0].width
    images = np.zeros((n_frames, n_views, h, w, 3))
    masks = np.zeros((n_frames, n_views, h, w))
    for i in range(n_frames):
        for j in range(n_views):
            images[i, j] = read_ppm(root / "frames" / f"{i}_{j}.ppm")
            masks[i, j] = read_pgm(root / "masks" / f"{i}_{j}.pgm")
    return SceneDataset(images=images, masks=(masks > 0.5).astype(np.float64),
                        cameras=cameras,
                        n_train_views=n_train_views or n_views, scene=None)


def load_gt_cloud(dirpath) -> tuple[np.ndarray, np.ndarray]:
    pts = read_pts(Path(dirpath) / "scene_gt.pts")
    return pts.positions.data, pts.colors.data
