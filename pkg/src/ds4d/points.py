"""Canonical Gaussian point set: initialization and feature retrieval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .camera import Camera, camera_project, in_frame
from .errors import ConfigError, DomainError, ShapeError

Array = np.ndarray


@dataclass
class GaussianPointSet:
    """Positions, isotropic scales, rotations, opacities, and flat RGB colors.

    All attributes are autodiff tensors so the training loop can optimize
    them directly. Quaternions are stored (w, x, y, z) and kept unit-norm;
    the isotropic renderer ignores them, but they are carried and deformed.
    """

    positions: Tensor
    scales: Tensor
    rotations: Tensor
    opacities: Tensor
    colors: Tensor

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.positions.shape != (n, 3) or self.colors.shape != (n, 3):
            raise ShapeError("positions and colors must be (N, 3)")
        if self.scales.shape != (n,) or self.opacities.shape != (n,):
            raise ShapeError("scales and opacities must be (N,)")
        if self.rotations.shape != (n, 4):
            raise ShapeError("rotations must be (N, 4) quaternions")

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_arrays(cls, positions, scales, rotations, opacities, colors,
                    requires_grad: bool = False) -> "GaussianPointSet":
        def t(arr, name):
            return Tensor(np.asarray(arr, dtype=np.float64),
                          requires_grad=requires_grad, name=f"points.{name}")
        return cls(t(positions, "positions"), t(scales, "scales"),
                   t(rotations, "rotations"), t(opacities, "opacities"),
                   t(colors, "colors"))

    def parameters(self) -> list[Tensor]:
        return [self.positions, self.scales, self.rotations, self.opacities, self.colors]

    def trainable(self) -> list[Tensor]:
        """Attributes the optimizer touches; rotations stay fixed under the
        isotropic renderer and are only changed by deformation."""
        return [self.positions, self.scales, self.opacities, self.colors]

    def copy(self, requires_grad: bool | None = None) -> "GaussianPointSet":
        rg = any(p.requires_grad for p in self.parameters()) if requires_grad is None else requires_grad
        return GaussianPointSet.from_arrays(
            self.positions.data, self.scales.data, self.rotations.data,
            self.opacities.data, self.colors.data, requires_grad=rg)

    def clamp_invariants(self) -> None:
        """Restore field invariants after a raw optimizer step."""
        np.clip(self.opacities.data, 0.0, 1.0, out=self.opacities.data)
        np.clip(self.colors.data, 0.0, 1.0, out=self.colors.data)
        np.maximum(self.scales.data, 1e-6, out=self.scales.data)
        norms = np.linalg.norm(self.rotations.data, axis=1, keepdims=True)
        self.rotations.data = self.rotations.data / np.maximum(norms, 1e-12)


@dataclass
class PointFeatures:
    """Per-view features sampled at projected point locations.

    ``features`` has shape (N, V, width); rows where ``valid`` is False are
    exactly zero.
    """

    time_index: int
    features: Array
    valid: Array


def nearest_neighbor_stats(positions: Array) -> float:
    """Median nearest-neighbor distance, exact O(N^2)."""
    pts = np.asarray(positions, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise DomainError("nearest-neighbor statistics need at least 2 points")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    return float(np.median(np.sqrt(d2.min(axis=1))))


def init_points(cloud_positions: Array, cloud_colors: Array, n_points: int,
                rng: np.random.Generator, jitter_radius: float | None = None,
                requires_grad: bool = False) -> GaussianPointSet:
    """Build a point set of exactly ``n_points`` from a colored cloud.

    Larger clouds are subsampled without replacement; smaller ones are
    padded with jittered copies of existing points. Scales start at half
    the median nearest-neighbor distance, opacities at 0.8, rotations at
    identity.
    """
    pos = np.asarray(cloud_positions, dtype=np.float64)
    col = np.asarray(cloud_colors, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ShapeError("cloud positions must be (M, 3)")
    if pos.shape[0] == 0:
        raise ConfigError("point cloud is empty")
    if n_points < 1:
        raise ConfigError(f"n_points must be >= 1, got {n_points}")

    m = pos.shape[0]
    if m == n_points:
        out_pos, out_col = pos.copy(), col.copy()
    elif m > n_points:
        idx = rng.choice(m, size=n_points, replace=False)
        idx.sort()
        out_pos, out_col = pos[idx], col[idx]
    else:
        if jitter_radius is None:
            extent = float(np.linalg.norm(pos.max(axis=0) - pos.min(axis=0)))
            jitter_radius = max(1e-2, 0.05 * extent)
        idx = rng.integers(0, m, size=n_points - m)
        direction = rng.standard_normal((n_points - m, 3))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-12)
        radii = rng.uniform(0.0, jitter_radius, size=(n_points - m, 1))
        out_pos = np.concatenate([pos, pos[idx] + direction * radii])
        out_col = np.concatenate([col, col[idx]])

    if n_points >= 2:
        scale0 = 0.5 * nearest_neighbor_stats(out_pos)
    else:
        scale0 = 0.1
    scales = np.full(n_points, max(scale0, 1e-6))
    rotations = np.zeros((n_points, 4))
    rotations[:, 0] = 1.0
    opacities = np.full(n_points, 0.8)
    return GaussianPointSet.from_arrays(out_pos, scales, rotations, opacities,
                                        np.clip(out_col, 0.0, 1.0),
                                        requires_grad=requires_grad)


def retrieve_point_features(points: GaussianPointSet, feature_maps: Array,
                            cameras: list[Camera], time_index: int) -> PointFeatures:
    """Sample decoupled feature tokens at each point's projection per view.

    ``feature_maps`` is (V, P, width) for one timestamp with tokens in
    row-major grid order. The p x p token grid is registered to the image
    with token (row b, col a) centered at pixel ((a+0.5)w/p, (b+0.5)h/p);
    sampling is bilinear with edge clamping. Points behind the camera or
    outside the frame get zero features and a False validity flag. Occlusion
    is deliberately not tested; cross-view disagreement is resolved later by
    fusion.
    """
    maps = np.asarray(feature_maps, dtype=np.float64)
    if maps.ndim != 3:
        raise ShapeError("feature_maps must be (V, P, width)")
    if maps.shape[0] != len(cameras):
        raise ShapeError(
            f"feature maps cover {maps.shape[0]} views but {len(cameras)} cameras given")
    p = int(round(np.sqrt(maps.shape[1])))
    if p * p != maps.shape[1]:
        raise ShapeError(f"token count {maps.shape[1]} is not a square grid")

    n = len(points)
    width = maps.shape[2]
    feats = np.zeros((n, len(cameras), width))
    valid = np.zeros((n, len(cameras)), dtype=bool)
    X = points.positions.data

    for j, cam in enumerate(cameras):
        u, v, _, vis = camera_project(cam, X)
        ok = in_frame(cam, u, v, vis)
        if not ok.any():
            continue
        gx = np.clip(u[ok] * p / cam.width - 0.5, 0.0, p - 1.0)
        gy = np.clip(v[ok] * p / cam.height - 0.5, 0.0, p - 1.0)
        x0 = np.minimum(np.floor(gx).astype(np.int64), p - 2) if p > 1 else np.zeros(ok.sum(), np.int64)
        y0 = np.minimum(np.floor(gy).astype(np.int64), p - 2) if p > 1 else np.zeros(ok.sum(), np.int64)
        fx = gx - x0
        fy = gy - y0
        grid = maps[j].reshape(p, p, width)
        if p > 1:
            sample = (
                grid[y0, x0] * ((1 - fx) * (1 - fy))[:, None]
                + grid[y0, x0 + 1] * (fx * (1 - fy))[:, None]
                + grid[y0 + 1, x0] * ((1 - fx) * fy)[:, None]
                + grid[y0 + 1, x0 + 1] * (fx * fy)[:, None]
            )
        else:
            sample = np.repeat(grid[0, 0][None, :], int(ok.sum()), axis=0)
        feats[ok, j] = sample
        valid[:, j] = ok
    return PointFeatures(time_index=time_index, features=feats, valid=valid)
