"""Heatmap and score-map image export."""

from __future__ import annotations

import numpy as np

from .camera import Camera, camera_project, in_frame
from .errors import DomainError
from .io import write_pgm
from .points import GaussianPointSet
from .render import MIN_FOOTPRINT_PX, TRUNCATION_SIGMAS


def export_heatmap(grid: np.ndarray, path, out_size: int = 256) -> None:
    """Nearest-neighbor upscale of a [0, 1] grid to an 8-bit PGM."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise DomainError("heatmap grid must be 2-D")
    if grid.size and (grid.min() < 0.0 or grid.max() > 1.0):
        raise DomainError("heatmap values must lie in [0, 1]")
    p, q = grid.shape
    rows = np.minimum((np.arange(out_size) * p) // out_size, p - 1)
    cols = np.minimum((np.arange(out_size) * q) // out_size, q - 1)
    write_pgm(path, grid[np.ix_(rows, cols)])


def scoremap_image(scores: np.ndarray, points: GaussianPointSet,
                   cam: Camera) -> np.ndarray:
    """Splat per-point weights into image space with max reduction, then
    normalize to [0, 1]."""
    scores = np.asarray(scores, dtype=np.float64)
    img = np.zeros((cam.height, cam.width))
    u, v, depth, valid = camera_project(cam, points.positions.data)
    ok = in_frame(cam, u, v, valid)
    f = cam.focal
    for idx in np.flatnonzero(ok):
        rho = max(points.scales.data[idx] * f / depth[idx], MIN_FOOTPRINT_PX)
        rad = TRUNCATION_SIGMAS * rho
        x0 = max(int(np.ceil(u[idx] - rad - 0.5)), 0)
        x1 = min(int(np.floor(u[idx] + rad - 0.5)), cam.width - 1)
        y0 = max(int(np.ceil(v[idx] - rad - 0.5)), 0)
        y1 = min(int(np.floor(v[idx] + rad - 0.5)), cam.height - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        d2 = (px[None, :] - u[idx]) ** 2 + (py[:, None] - v[idx]) ** 2
        g = np.where(d2 <= rad * rad, np.exp(-d2 / (2 * rho * rho)), 0.0)
        window = img[y0:y1 + 1, x0:x1 + 1]
        np.maximum(window, scores[idx] * g, out=window)
    peak = img.max()
    if peak > 0:
        img /= peak
    return img


def export_scoremap(scores: np.ndarray, points: GaussianPointSet, cam: Camera,
                    path) -> None:
    write_pgm(path, scoremap_image(scores, points, cam))
