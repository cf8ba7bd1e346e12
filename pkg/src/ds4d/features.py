"""Deterministic patch descriptors standing in for a pretrained extractor.

Each p x p patch of the image yields a D-vector: mean RGB, mean absolute
horizontal and vertical intensity gradient, intensity variance, and a fixed
seeded random projection of the raw patch pixels filling the remaining
channels. The extractor is a pure function of the image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

Array = np.ndarray

LUMA = np.array([0.299, 0.587, 0.114])

_PROJECTION_SEED = 714
_projection_cache: dict[tuple[int, int], Array] = {}


def _projection_matrix(pixels: int, channels: int) -> Array:
    key = (pixels, channels)
    if key not in _projection_cache:
        rng = np.random.default_rng(_PROJECTION_SEED)
        _projection_cache[key] = rng.standard_normal((channels, pixels)) / np.sqrt(pixels)
    return _projection_cache[key]


@dataclass
class FrameFeatures:
    """Token grid for one (time, view) frame; tokens are row-major."""

    time_index: int
    view_index: int
    tokens: Array
    grid_size: int

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def extract_features(image: Array, p: int, dim: int,
                     time_index: int = 0, view_index: int = 0) -> FrameFeatures:
    """Compute the p*p x D token grid for one image."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError("image must be (h, w, 3)")
    if dim < 6:
        raise ShapeError("feature dimension must be >= 6")
    h, w = img.shape[:2]
    if h % p or w % p:
        raise ShapeError(f"image {h}x{w} does not divide into {p}x{p} patches")
    ph, pw = h // p, w // p

    # (p, p, ph, pw, 3) patch view, rows first.
    patches = img.reshape(p, ph, p, pw, 3).transpose(0, 2, 1, 3, 4)
    mean_rgb = patches.mean(axis=(2, 3))
    luma = patches @ LUMA
    if pw > 1:
        gx = np.abs(np.diff(luma, axis=3)).mean(axis=(2, 3))
    else:
        gx = np.zeros((p, p))
    if ph > 1:
        gy = np.abs(np.diff(luma, axis=2)).mean(axis=(2, 3))
    else:
        gy = np.zeros((p, p))
    var = luma.var(axis=(2, 3))

    out = np.zeros((p, p, dim))
    out[:, :, 0:3] = mean_rgb
    out[:, :, 3] = gx
    out[:, :, 4] = gy
    out[:, :, 5] = var
    if dim > 6:
        proj = _projection_matrix(ph * pw * 3, dim - 6)
        flat = patches.reshape(p, p, -1)
        out[:, :, 6:] = flat @ proj.T
    return FrameFeatures(time_index, view_index, out.reshape(p * p, dim), p)


def extract_feature_set(images: Array, p: int, dim: int) -> "FeatureSet":
    """Extract features for a full (T, V, h, w, 3) image stack."""
    t, v = images.shape[:2]
    tokens = np.zeros((t, v, p * p, dim))
    for i in range(t):
        for j in range(v):
            tokens[i, j] = extract_features(images[i, j], p, dim).tokens
    return FeatureSet(tokens=tokens, grid_size=p)


@dataclass
class FeatureSet:
    """All frame features of a dataset: tokens (T, V, P, width)."""

    tokens: Array
    grid_size: int

    @property
    def n_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_views(self) -> int:
        return self.tokens.shape[1]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[2]

    @property
    def width(self) -> int:
        return self.tokens.shape[3]

    def frame(self, i: int, j: int) -> FrameFeatures:
        return FrameFeatures(i, j, self.tokens[i, j], self.grid_size)
