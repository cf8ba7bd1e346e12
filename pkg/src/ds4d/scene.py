"""Synthetic 4D ground truth: deforming colored point clouds plus rendering.

Three motion families are provided. ``oscillation`` moves one spatial side
of a blob up and down, ``swing`` rotates an arm of points about a hinge,
and ``occlusion`` adds a static wall that hides the moving cluster from one
novel view. Scenes are deterministic in the seed, and ground-truth videos
are rendered with the same splat rasterizer the model trains against, so a
perfect fit is representable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Camera, orbit_camera
from .errors import ConfigError, DataError
from .points import GaussianPointSet, nearest_neighbor_stats
from .render import splat_render

Array = np.ndarray

MOTION_FAMILIES = ("oscillation", "swing", "occlusion")


SELECTIONS = ("interleaved", "half")


@dataclass
class SceneSpec:
    """Parameters for :func:`generate_scene`.

    ``selection`` controls which points move: "interleaved" scatters the
    dynamic subset through the whole body (so motion cannot be read off
    spatial position alone), "half" moves the largest-x side as one region.
    """

    family: str = "oscillation"
    n_points: int = 200
    fraction_static: float = 0.6
    amplitude: float = 0.3
    body_radius: float = 0.75
    selection: str = "interleaved"

    def __post_init__(self):
        if self.family not in MOTION_FAMILIES:
            raise ConfigError(
                f"unknown motion family {self.family!r}; expected one of {MOTION_FAMILIES}")
        if self.n_points < 1:
            raise ConfigError("n_points must be >= 1")
        if not (0.0 <= self.fraction_static <= 1.0):
            raise ConfigError("fraction_static must lie in [0, 1]")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"unknown selection {self.selection!r}")


@dataclass
class SyntheticScene:
    """A colored point cloud with a parametric trajectory per point.

    ``amplitudes`` holds a per-point displacement vector: oscillating points
    follow base + amp * sin(2 pi t). Swing points instead rotate about
    ``hinge``/``hinge_axis`` by angle_max * sin(2 pi t). Time is normalized
    to [0, 1].
    """

    base_positions: Array
    colors: Array
    scales: Array
    opacities: Array
    dynamic_mask: Array
    amplitudes: Array
    swing_angle_max: Array
    hinge: Array = field(default_factory=lambda: np.zeros(3))
    hinge_axis: Array = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    background: tuple = (0.0, 0.0, 0.0)

    @property
    def n_points(self) -> int:
        return self.base_positions.shape[0]

    def positions_at(self, t: float) -> Array:
        """Point positions at normalized time t in [0, 1]."""
        phase = np.sin(2.0 * np.pi * t)
        pos = self.base_positions + self.amplitudes * phase
        swinging = self.swing_angle_max != 0.0
        if swinging.any():
            angle = self.swing_angle_max[swinging] * phase
            axis = self.hinge_axis / np.linalg.norm(self.hinge_axis)
            rel = self.base_positions[swinging] - self.hinge
            cos, sin = np.cos(angle)[:, None], np.sin(angle)[:, None]
            a_cross = np.cross(np.broadcast_to(axis, rel.shape), rel)
            a_dot = (rel @ axis)[:, None] * axis
            pos[swinging] = self.hinge + rel * cos + a_cross * sin + a_dot * (1.0 - cos)
        return pos

    def point_set_at(self, t: float, requires_grad: bool = False) -> GaussianPointSet:
        rot = np.zeros((self.n_points, 4))
        rot[:, 0] = 1.0
        return GaussianPointSet.from_arrays(
            self.positions_at(t), self.scales, rot, self.opacities, self.colors,
            requires_grad=requires_grad)


def _blob(rng: np.random.Generator, n: int, radius: float) -> Array:
    """Points filling a ball, mildly squashed in z for visual asymmetry."""
    pts = rng.standard_normal((n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= radius * rng.uniform(0.35, 1.0, (n, 1)) ** (1.0 / 3.0)
    pts[:, 2] *= 0.8
    return pts


def _position_colors(pos: Array) -> Array:
    """Smooth position-derived coloring so features carry texture."""
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    unit = (pos - lo) / span
    r = 0.15 + 0.7 * unit[:, 0]
    g = 0.15 + 0.7 * unit[:, 1]
    b = 0.85 - 0.7 * unit[:, 2]
    return np.stack([r, g, b], axis=1)


def generate_scene(spec: SceneSpec, seed: int) -> SyntheticScene:
    """Deterministically build a synthetic scene from a spec and a seed."""
    rng = np.random.default_rng(seed)
    n = spec.n_points
    pos = _blob(rng, n, spec.body_radius)
    colors = _position_colors(pos)
    amplitudes = np.zeros((n, 3))
    swing_max = np.zeros(n)
    hinge = np.zeros(3)
    hinge_axis = np.array([0.0, 0.0, 1.0])

    n_dynamic = n - int(round(spec.fraction_static * n))

    def pick_moving() -> Array:
        if spec.selection == "half":
            return np.argsort(-pos[:, 0], kind="stable")[:n_dynamic]
        # Interleave through the body, but favor the side facing away from
        # the front camera (+z): no single view then covers the motion,
        # which is what cross-view fusion is for.
        z_unit = (pos[:, 2] - pos[:, 2].min()) / max(np.ptp(pos[:, 2]), 1e-9)
        weight = np.exp(-2.5 * z_unit)
        weight /= weight.sum()
        return np.sort(rng.choice(n, size=n_dynamic, replace=False, p=weight))

    if spec.family == "oscillation":
        # Moving points look like their neighbors in any single frame;
        # motion is only visible as change over time.
        moving = pick_moving()
        amplitudes[moving, 1] = spec.amplitude
    elif spec.family == "swing":
        order = np.argsort(-pos[:, 1], kind="stable")
        moving = order[:n_dynamic]
        hinge = np.array([0.0, spec.body_radius * 0.5, 0.0])
        hinge_axis = np.array([0.0, 0.0, 1.0])
        swing_max[moving] = 2.2 * spec.amplitude
    else:  # occlusion
        # Moving cluster sits toward +x; a static wall just beyond it hides
        # it from the azimuth-90 camera while the front view sees it.
        order = np.argsort(-pos[:, 0], kind="stable")
        moving = order[:n_dynamic]
        pos[moving] = 0.32 * pos[moving] + np.array([0.55, 0.0, 0.0])
        amplitudes[moving, 1] = spec.amplitude
        colors[moving] = _position_colors(pos)[moving]
        colors[moving, 0] = np.clip(colors[moving, 0] + 0.2, 0.0, 1.0)
        n_wall = max(24, n // 5)
        wy = rng.uniform(-0.75, 0.75, n_wall)
        wz = rng.uniform(-0.75, 0.75, n_wall)
        wall = np.stack([np.full(n_wall, 0.95), wy, wz], axis=1)
        pos = np.concatenate([pos, wall])
        colors = np.concatenate([colors, np.tile([0.35, 0.35, 0.4], (n_wall, 1))])
        amplitudes = np.concatenate([amplitudes, np.zeros((n_wall, 3))])
        swing_max = np.concatenate([swing_max, np.zeros(n_wall)])
        n = pos.shape[0]

    if n >= 2:
        base_scale = 0.5 * nearest_neighbor_stats(pos)
    else:
        base_scale = 0.1
    scales = np.full(n, max(base_scale, 1e-4))
    opacities = np.full(n, 0.8)
    dynamic = (np.linalg.norm(amplitudes, axis=1) > 0) | (swing_max != 0)
    return SyntheticScene(
        base_positions=pos, colors=np.clip(colors, 0.0, 1.0), scales=scales,
        opacities=opacities, dynamic_mask=dynamic, amplitudes=amplitudes,
        swing_angle_max=swing_max, hinge=hinge, hinge_axis=hinge_axis)


def default_cameras(n_train: int = 4, n_holdout: int = 2, width: int = 64,
                    height: int = 64, fov: float = 0.7) -> tuple[list[Camera], int]:
    """Front view plus evenly spaced novel orbits, then held-out azimuths.

    Returns (cameras, n_train); camera 0 is the front view.
    """
    azimuths = [j * 360.0 / n_train for j in range(n_train)]
    azimuths += [45.0 + k * 360.0 / max(n_holdout, 1) for k in range(n_holdout)]
    cams = [orbit_camera(az, width=width, height=height, fov=fov) for az in azimuths]
    return cams, n_train


@dataclass
class SceneDataset:
    """Rendered ground truth: images (T,V,h,w,3), masks (T,V,h,w)."""

    images: Array
    masks: Array
    cameras: list[Camera]
    n_train_views: int
    scene: SyntheticScene | None = None

    @property
    def n_frames(self) -> int:
        return self.images.shape[0]

    @property
    def n_views(self) -> int:
        return self.images.shape[1]

    def time_norm(self, i: int) -> float:
        return i / (self.n_frames - 1)

    def train_views(self) -> list[int]:
        return list(range(self.n_train_views))

    def holdout_views(self) -> list[int]:
        return list(range(self.n_train_views, self.n_views))

    def middle_index(self) -> int:
        return self.n_frames // 2

    def gt_cloud(self) -> tuple[Array, Array]:
        """Point cloud at the middle timestamp (positions, colors)."""
        if self.scene is None:
            raise DataError("dataset carries no scene; load scene_gt.pts instead")
        mid_t = self.time_norm(self.middle_index())
        return self.scene.positions_at(mid_t), self.scene.colors.copy()


def render_dataset(scene: SyntheticScene, cameras: list[Camera], n_frames: int,
                   n_train_views: int | None = None,
                   mask_threshold: float = 0.5) -> SceneDataset:
    """Render ground-truth frames and foreground masks for every (time, view)."""
    if n_frames < 2:
        raise ConfigError("need at least 2 frames")
    if len(cameras) < 2:
        raise ConfigError("need at least 2 cameras (front + novel views)")
    h, w = cameras[0].height, cameras[0].width
    images = np.zeros((n_frames, len(cameras), h, w, 3))
    masks = np.zeros((n_frames, len(cameras), h, w))
    for i in range(n_frames):
        pts = scene.point_set_at(i / (n_frames - 1))
        for j, cam in enumerate(cameras):
            frame = splat_render(pts, cam, scene.background)
            images[i, j] = frame.rgb_array()
            masks[i, j] = frame.mask_array(mask_threshold)
    return SceneDataset(images=images, masks=masks, cameras=list(cameras),
                        n_train_views=n_train_views or len(cameras), scene=scene)
