"""Cross-view fusion of per-point features into one dynamic-aware vector.

Global awareness (GA) scores every view of a point with a shared linear
scorer, softmaxes the scores across views, and takes the weighted sum.
Distance awareness (DA) anchors on the front view: non-front views are
augmented with their elementwise L1 distance to the front feature, fused by
a first scorer, and the result is fused with the (zero-padded) front
feature by a second scorer. Invalid views are masked to -inf before the
softmax, which renormalizes the remaining weights; a point invalid in every
view gets uniform weights over zero features and is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError
from .nn import LinearLayer, linear_apply, softmax

MASK_LOGIT = -1e30


@dataclass
class FusionResult:
    """Fused feature plus the per-view score map that produced it."""

    fused: Tensor
    scores: Tensor
    all_invalid: np.ndarray
    stage_scores: dict | None = None


def _score_logits(feats: Tensor, scorer: LinearLayer) -> Tensor:
    if scorer.out_dim != 1:
        raise ShapeError("fusion scorer must output a single logit")
    n, v, w = feats.shape
    logits = linear_apply(scorer, feats.reshape((n * v, w)))
    return logits.reshape((n, v))


def _masked_view_softmax(logits: Tensor, valid: np.ndarray) -> Tensor:
    mask = np.where(valid, 0.0, MASK_LOGIT)
    return softmax(logits + Tensor(mask), axis=1)


def _weighted_sum(feats: Tensor, weights: Tensor, anchor: Tensor) -> Tensor:
    # Anchored form: weights sum to 1 only up to rounding, so the plain sum
    # misses the convexity fixed point by an ulp; relative to an anchor it
    # is exact when all views agree.
    n, v, w = feats.shape
    rel = feats - anchor.reshape((n, 1, w))
    return anchor + (rel * weights.reshape((n, v, 1))).sum(axis=1)


def ga_fuse(feats: Tensor, valid: np.ndarray, scorer: LinearLayer) -> FusionResult:
    """Globally aware fusion over all views at one timestamp.

    ``feats`` is (N, V, W) with invalid rows exactly zero; ``valid`` is the
    matching (N, V) boolean mask.
    """
    if feats.ndim != 3:
        raise ShapeError("features must be (N, V, W)")
    if valid.shape != feats.shape[:2]:
        raise ShapeError("validity mask must be (N, V)")
    weights = _masked_view_softmax(_score_logits(feats, scorer), valid)
    fused = _weighted_sum(feats, weights, feats[:, 0, :])
    return FusionResult(fused=fused, scores=weights, all_invalid=~valid.any(axis=1))


def average_fuse(feats: Tensor, valid: np.ndarray) -> FusionResult:
    """Uniform average over valid views; the TSSF-avg ablation."""
    n, v, _ = feats.shape
    counts = valid.sum(axis=1)
    wts = np.where(valid, 1.0, 0.0) / np.maximum(counts, 1)[:, None]
    wts[counts == 0] = 1.0 / v
    weights = Tensor(wts)
    fused = _weighted_sum(feats, weights, feats[:, 0, :])
    return FusionResult(fused=fused, scores=weights, all_invalid=counts == 0)


def da_fuse(feats: Tensor, valid: np.ndarray, scorer_a: LinearLayer,
            scorer_b: LinearLayer, front_view: int = 0) -> FusionResult:
    """Distance-aware two-stage fusion anchored on the front view.

    Output width is 2W: the front feature enters stage two padded with its
    (zero) self-distance block, so when every view equals the front feature
    the result is exactly [front, 0]. With a single view the fusion reduces
    to that passthrough.
    """
    if feats.ndim != 3:
        raise ShapeError("features must be (N, V, W)")
    n, v, w = feats.shape
    front = feats[:, front_view, :]
    zeros = Tensor(np.zeros((n, w)))
    front_pad = ad.concat([front, zeros], axis=1)
    if v == 1:
        return FusionResult(fused=front_pad, scores=Tensor(np.ones((n, 1))),
                            all_invalid=~valid.any(axis=1))

    others = [j for j in range(v) if j != front_view]
    feats_o = feats[:, others, :]
    valid_o = valid[:, others]
    dist = ad.absolute(front.reshape((n, 1, w)) - feats_o)
    aug = ad.concat([feats_o, dist], axis=2)
    # Invalid views must stay exactly zero; their distance block would
    # otherwise leak |front|.
    aug = aug * Tensor(valid_o[:, :, None].astype(np.float64))

    w1 = _masked_view_softmax(_score_logits(aug, scorer_a), valid_o)
    fused_o = _weighted_sum(aug, w1, aug[:, 0, :])

    stage2 = ad.stack([front_pad, fused_o], axis=1)
    valid2 = np.stack([valid[:, front_view], valid_o.any(axis=1)], axis=1)
    w2 = _masked_view_softmax(_score_logits(stage2, scorer_b), valid2)
    fused = _weighted_sum(stage2, w2, front_pad)

    eff = np.zeros((n, v))
    eff[:, front_view] = w2.data[:, 0]
    eff[:, others] = w2.data[:, 1:2] * w1.data
    return FusionResult(fused=fused, scores=Tensor(eff),
                        all_invalid=~valid.any(axis=1),
                        stage_scores={"others": w1, "front_vs_others": w2})


def fuse_gaussian_features(f_hg: Tensor, f_a: Tensor | None, mixer: LinearLayer,
                           extras: Tensor | None = None) -> Tensor:
    """Mix field features, fused point features, and optional per-point
    attribute channels through one learnable linear map."""
    parts = [f_hg]
    if f_a is not None:
        parts.append(f_a)
    if extras is not None:
        parts.append(extras)
    cat = parts[0] if len(parts) == 1 else ad.concat(parts, axis=1)
    if cat.shape[1] != mixer.in_dim:
        raise ShapeError(
            f"mixer expects width {mixer.in_dim}, got {cat.shape[1]}")
    return linear_apply(mixer, cat)
