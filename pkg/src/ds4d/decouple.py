"""Dynamic-static decoupling of frame features against reference frames.

Every token f is split against the matching reference token r into

    f_static  = ((f . r) / ||r||^2) r        (projection onto r)
    f_dynamic = f - f_static                 (orthogonal residual)

so that f_static + f_dynamic == f exactly and f_dynamic . r == 0. Two
references per view are supported: the middle-timestamp frame and the
per-view average over time. Decoupled tokens are the original token with
the dynamic component(s) appended.

A zero reference makes the projection ill-defined; the conservative policy
here is all-dynamic (static part zero), which keeps reconstruction exact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .features import FeatureSet

Array = np.ndarray

DEGENERATE_NORM = 1e-12
DECOUPLE_MODES = ("mid", "avg", "concat-both")
COMBINE_MODES = ("concat", "sum")
GRANULARITIES = ("token", "flat")


@dataclass
class ReferenceFeatures:
    """Per-view reference tokens: middle frame and temporal average."""

    mid: Array
    avg: Array
    middle_index: int

    @property
    def n_views(self) -> int:
        return self.mid.shape[0]


def select_references(features: FeatureSet) -> ReferenceFeatures:
    """Middle frame is floor(T/2); average is the per-token temporal mean."""
    if features.n_frames < 2:
        raise DataError("need at least 2 frames to pick references")
    if not np.all(np.isfinite(features.tokens)):
        raise DataError("frame features contain non-finite values")
    mid = features.n_frames // 2
    return ReferenceFeatures(
        mid=features.tokens[mid].copy(),
        avg=features.tokens.mean(axis=0),
        middle_index=mid,
    )


def decouple(f: Array, r: Array) -> tuple[Array, Array]:
    """Split one token (or a batch ending in the channel axis) against r."""
    f = np.asarray(f, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if f.shape != r.shape:
        raise ShapeError(f"token shapes differ: {f.shape} vs {r.shape}")
    dot = np.sum(f * r, axis=-1, keepdims=True)
    r2 = np.sum(r * r, axis=-1, keepdims=True)
    ok = r2 >= DEGENERATE_NORM**2
    coef = np.where(ok, dot / np.where(ok, r2, 1.0), 0.0)
    static = coef * r
    return static, f - static


@dataclass
class DecoupledFeatures:
    """Frame tokens with appended dynamic components.

    ``tokens`` is (T, V, P, width) where the first ``base_dim`` channels are
    the unmodified frame features. ``provenance`` names which reference(s)
    produced the dynamic tail.
    """

    tokens: Array
    grid_size: int
    base_dim: int
    provenance: str
    elapsed_seconds: float

    @property
    def n_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_views(self) -> int:
        return self.tokens.shape[1]

    @property
    def width(self) -> int:
        return self.tokens.shape[3]

    def dynamic_part(self, i: int, j: int) -> Array:
        return self.tokens[i, j, :, self.base_dim:]


def _frame_dynamic(frame: Array, ref: Array, granularity: str) -> Array:
    if granularity == "token":
        return decouple(frame, ref)[1]
    flat_dyn = decouple(frame.reshape(-1), ref.reshape(-1))[1]
    return flat_dyn.reshape(frame.shape)


def decouple_all(features: FeatureSet, refs: ReferenceFeatures,
                 mode: str = "concat-both", combine: str = "concat",
                 granularity: str = "token") -> DecoupledFeatures:
    """Decouple every frame against the chosen per-view reference(s).

    ``mode`` picks the reference: the middle frame, the temporal average, or
    both (dynamic parts combined per ``combine``: concatenated for 3D-wide
    tokens, or summed for 2D-wide ones). ``granularity`` controls whether
    the projection runs per token or over the flattened frame.
    """
    if mode not in DECOUPLE_MODES:
        raise ConfigError(f"unknown decouple mode {mode!r}; expected one of {DECOUPLE_MODES}")
    if combine not in COMBINE_MODES:
        raise ConfigError(f"unknown combine {combine!r}; expected one of {COMBINE_MODES}")
    if granularity not in GRANULARITIES:
        raise ConfigError(f"unknown granularity {granularity!r}")
    t, v, p_tokens, dim = features.tokens.shape
    if refs.mid.shape != (v, p_tokens, dim):
        raise ShapeError(
            f"references shaped {refs.mid.shape} do not match features {(v, p_tokens, dim)}")

    ref_list = {"mid": [refs.mid], "avg": [refs.avg], "concat-both": [refs.mid, refs.avg]}[mode]
    n_refs = len(ref_list)
    if mode == "concat-both" and combine == "concat":
        width = dim * (1 + n_refs)
    else:
        width = 2 * dim
    out = np.zeros((t, v, p_tokens, width))
    out[:, :, :, :dim] = features.tokens

    start = time.perf_counter()
    for i in range(t):
        for j in range(v):
            frame = features.tokens[i, j]
            parts = [_frame_dynamic(frame, ref[j], granularity) for ref in ref_list]
            if mode == "concat-both" and combine == "sum":
                out[i, j, :, dim:] = parts[0] + parts[1]
            else:
                for k, part in enumerate(parts):
                    out[i, j, :, dim * (1 + k):dim * (2 + k)] = part
    elapsed = time.perf_counter() - start

    provenance = {"mid": "mid", "avg": "avg", "concat-both": "mid+avg"}[mode]
    return DecoupledFeatures(tokens=out, grid_size=features.grid_size, base_dim=dim,
                             provenance=provenance, elapsed_seconds=elapsed)


@dataclass
class PairwiseTiming:
    """Wall-clock result of the frame-by-frame decoupling baseline."""

    elapsed_seconds: float
    pairs_per_view: int
    n_views: int


def decouple_all_pairs(features: FeatureSet, granularity: str = "token") -> PairwiseTiming:
    """Frame-by-frame baseline: decouple every frame against every other
    frame of the same view, discarding results. Only the timing matters;
    it anchors the speed comparison against reference-based decoupling.
    """
    t, v = features.n_frames, features.n_views
    if t < 2:
        raise DataError("pairwise decoupling needs at least 2 frames")
    start = time.perf_counter()
    pairs = 0
    for j in range(v):
        for i in range(t):
            frame = features.tokens[i, j]
            for k in range(t):
                if k != i:
                    _frame_dynamic(frame, features.tokens[k, j], granularity)
                    if j == 0:
                        pairs += 1
    elapsed = time.perf_counter() - start
    return PairwiseTiming(elapsed_seconds=elapsed, pairs_per_view=pairs, n_views=v)


def dynamic_heatmap(decoupled: DecoupledFeatures, i: int, j: int) -> Array:
    """Per-token norm of the dynamic channels, min-max scaled to [0, 1].

    An all-zero dynamic part (fully static frame) maps to the uniform zero
    grid rather than dividing by zero.
    """
    if not (0 <= i < decoupled.n_frames and 0 <= j < decoupled.n_views):
        raise DataError(f"frame ({i}, {j}) outside dataset")
    p = decoupled.grid_size
    norms = np.linalg.norm(decoupled.dynamic_part(i, j), axis=1).reshape(p, p)
    lo, hi = norms.min(), norms.max()
    if hi - lo < 1e-300:
        return np.zeros((p, p))
    return (norms - lo) / (hi - lo)
