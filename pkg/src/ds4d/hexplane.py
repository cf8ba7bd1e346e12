"""Factorized spatiotemporal feature field over six 2-D plane grids.

The 4-D coordinate (x, y, z, t) is addressed through its six coordinate
pairs. A query bilinearly samples each plane, multiplies the six sampled
C-vectors elementwise per resolution level, and concatenates levels, giving
a feature of width levels * channels. Coordinates are normalized by the
field bounds and clamped, so out-of-range queries are absorbed at the
border (with zero gradient through the clamp).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

PLANE_PAIRS = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))
PLANE_NAMES = ("xy", "xz", "yz", "xt", "yt", "zt")


def clamp01(t: Tensor) -> Tensor:
    """Clamp to [0, 1]; gradient is zero where the clamp is active."""
    inside = (t.data >= 0.0) & (t.data <= 1.0)

    def backward(grad):
        t._accumulate(grad * inside)

    return ad.make_op(np.clip(t.data, 0.0, 1.0), (t,), backward)


def bilinear_sample(grid: Tensor, coords: Tensor) -> Tensor:
    """Sample a (R, R, C) grid at (N, 2) coordinates in [0, R-1] grid units.

    Exact at integer nodes and linear along each axis. Gradients flow to
    both the grid cells and the query coordinates.
    """
    r = grid.shape[0]
    if grid.ndim != 3 or grid.shape[1] != r:
        raise ShapeError("grid must be (R, R, C)")
    xy = coords.data
    x0 = np.floor(xy[:, 0]).astype(np.int64)
    y0 = np.floor(xy[:, 1]).astype(np.int64)
    x0 = np.clip(x0, 0, max(r - 2, 0))
    y0 = np.clip(y0, 0, max(r - 2, 0))
    fx = xy[:, 0] - x0
    fy = xy[:, 1] - y0
    x1 = np.minimum(x0 + 1, r - 1)
    y1 = np.minimum(y0 + 1, r - 1)
    g = grid.data
    w00 = ((1 - fx) * (1 - fy))[:, None]
    w10 = (fx * (1 - fy))[:, None]
    w01 = ((1 - fx) * fy)[:, None]
    w11 = (fx * fy)[:, None]
    out = g[x0, y0] * w00 + g[x1, y0] * w10 + g[x0, y1] * w01 + g[x1, y1] * w11

    def backward(grad):
        if grid.requires_grad:
            full = np.zeros_like(grid.data)
            np.add.at(full, (x0, y0), grad * w00)
            np.add.at(full, (x1, y0), grad * w10)
            np.add.at(full, (x0, y1), grad * w01)
            np.add.at(full, (x1, y1), grad * w11)
            grid._accumulate(full)
        if coords.requires_grad:
            dx = ((g[x1, y0] - g[x0, y0]) * (1 - fy)[:, None]
                  + (g[x1, y1] - g[x0, y1]) * fy[:, None])
            dy = ((g[x0, y1] - g[x0, y0]) * (1 - fx)[:, None]
                  + (g[x1, y1] - g[x1, y0]) * fx[:, None])
            cg = np.stack([
                np.einsum("nc,nc->n", grad, dx),
                np.einsum("nc,nc->n", grad, dy),
            ], axis=1)
            coords._accumulate(cg)

    return ad.make_op(out, (grid, coords), backward)


@dataclass
class HexPlaneField:
    """Six multiresolution plane grids plus normalization bounds."""

    grids: dict
    resolutions: list
    channels: int
    bounds_min: np.ndarray
    bounds_max: np.ndarray

    @property
    def out_width(self) -> int:
        return len(self.resolutions) * self.channels

    def parameters(self) -> list[Tensor]:
        return [self.grids[(level, plane)]
                for level in range(len(self.resolutions))
                for plane in range(6)]


def init_hexplane(bounds_min, bounds_max, rng: np.random.Generator,
                  base_resolution: int = 16, level_multipliers=(1, 2, 4),
                  channels: int = 8, init_noise: float = 0.1) -> HexPlaneField:
    """Grids start near 1 so the six-way product carries gradients."""
    resolutions = [base_resolution * m for m in level_multipliers]
    if any(a >= b for a, b in zip(resolutions, resolutions[1:])):
        raise ConfigError("level resolutions must be strictly increasing")
    grids = {}
    for level, res in enumerate(resolutions):
        for plane in range(6):
            data = 1.0 + init_noise * rng.standard_normal((res, res, channels))
            grids[(level, plane)] = Tensor(data, requires_grad=True,
                                           name=f"hexplane.l{level}.{PLANE_NAMES[plane]}")
    return HexPlaneField(grids=grids, resolutions=resolutions, channels=channels,
                         bounds_min=np.asarray(bounds_min, float),
                         bounds_max=np.asarray(bounds_max, float))


def hexplane_query(field: HexPlaneField, positions: Tensor, t_norm: float) -> Tensor:
    """Dynamic features for N points at one normalized timestamp."""
    n = positions.shape[0]
    span = np.maximum(field.bounds_max - field.bounds_min, 1e-9)
    norm = clamp01((positions - field.bounds_min) * (1.0 / span))
    t_col = Tensor(np.full(n, np.clip(t_norm, 0.0, 1.0)))
    axes = [norm[:, 0], norm[:, 1], norm[:, 2], t_col]

    level_feats = []
    for level, res in enumerate(field.resolutions):
        scale = res - 1
        prod = None
        for plane, (a, b) in enumerate(PLANE_PAIRS):
            coords = ad.stack([axes[a] * scale, axes[b] * scale], axis=1)
            sample = bilinear_sample(field.grids[(level, plane)], coords)
            prod = sample if prod is None else prod * sample
        level_feats.append(prod)
    return ad.concat(level_feats, axis=1)
