"""Training objectives: reconstruction, mask, and a perceptual proxy.

The perceptual term replaces a pretrained-feature distance with a fixed
bank of eight zero-mean, unit-norm 5x5 filters (two difference-of-Gaussians
plus oriented first- and second-derivative kernels) applied to the image
luma at two scales; the loss is the mean squared difference of the filter
responses. Because every kernel has zero DC response, a constant intensity
shift is invisible to it while blur and structure changes are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

LUMA = np.array([0.299, 0.587, 0.114])
KERNEL_SIZE = 5


def _gaussian_kernel(sigma: float) -> np.ndarray:
    half = KERNEL_SIZE // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    g = np.exp(-(xx**2 + yy**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_bank() -> np.ndarray:
    half = KERNEL_SIZE // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    yy, xx = np.meshgrid(x, x, indexing="ij")
    kernels = [
        _gaussian_kernel(0.6) - _gaussian_kernel(1.2),
        _gaussian_kernel(1.0) - _gaussian_kernel(2.0),
    ]
    g1 = _gaussian_kernel(1.0)
    for theta in (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4):
        u = xx * np.cos(theta) + yy * np.sin(theta)
        kernels.append(-u * g1)
    for theta in (0.0, np.pi / 2):
        u = xx * np.cos(theta) + yy * np.sin(theta)
        kernels.append((u**2 - 1.0) * g1)
    bank = np.stack(kernels)
    bank -= bank.mean(axis=(1, 2), keepdims=True)
    bank /= np.linalg.norm(bank.reshape(len(kernels), -1), axis=1)[:, None, None]
    return bank


FILTER_BANK = _filter_bank()


def correlate_bank(img: Tensor, bank: np.ndarray) -> Tensor:
    """Valid-mode correlation of an (h, w) image with a (F, k, k) bank."""
    h, w = img.shape
    k = bank.shape[1]
    if h < k or w < k:
        raise ShapeError(f"image {h}x{w} smaller than filter size {k}")
    windows = np.lib.stride_tricks.sliding_window_view(img.data, (k, k))
    out = np.einsum("ijab,fab->fij", windows, bank)

    def backward(grad):
        pad = k - 1
        dimg = np.zeros_like(img.data)
        for f in range(bank.shape[0]):
            gp = np.pad(grad[f], pad)
            gw = np.lib.stride_tricks.sliding_window_view(gp, (k, k))
            dimg += np.einsum("ijab,ab->ij", gw, bank[f, ::-1, ::-1])
        img._accumulate(dimg)

    return ad.make_op(out, (img,), backward)


def _luma(rgb: Tensor) -> Tensor:
    return (rgb * Tensor(LUMA)).sum(axis=2)


def _halve(img: Tensor) -> Tensor:
    h, w = img.shape
    return img[: h - h % 2, : w - w % 2].reshape((h // 2, 2, w // 2, 2)).mean(axis=(1, 3))


def _check_same_shape(a, b, what: str) -> None:
    if tuple(a.shape) != tuple(np.asarray(b).shape):
        raise ShapeError(f"{what}: shapes {tuple(a.shape)} vs {tuple(np.asarray(b).shape)}")


def loss_rec(rendered_rgb: Tensor, gt_rgb: np.ndarray) -> Tensor:
    """Mean squared error over RGB."""
    rendered_rgb = ad.as_tensor(rendered_rgb)
    _check_same_shape(rendered_rgb, gt_rgb, "reconstruction loss")
    return ad.square(rendered_rgb - Tensor(gt_rgb)).mean()


def loss_mask(alpha: Tensor, gt_mask: np.ndarray) -> Tensor:
    """Mean squared error between rendered alpha and the foreground mask."""
    alpha = ad.as_tensor(alpha)
    _check_same_shape(alpha, gt_mask, "mask loss")
    return ad.square(alpha - Tensor(gt_mask)).mean()


def perceptual_responses(rgb: Tensor) -> list[Tensor]:
    """Filter-bank responses at full and half resolution."""
    luma = _luma(ad.as_tensor(rgb))
    return [correlate_bank(luma, FILTER_BANK),
            correlate_bank(_halve(luma), FILTER_BANK)]


def loss_perceptual_proxy(rendered_rgb, gt_rgb) -> Tensor:
    """Mean squared filter-response difference; zero for identical images,
    symmetric, and blind to constant offsets."""
    rendered_rgb = ad.as_tensor(rendered_rgb)
    _check_same_shape(rendered_rgb, gt_rgb, "perceptual proxy")
    resp_a = perceptual_responses(rendered_rgb)
    resp_b = perceptual_responses(ad.as_tensor(np.asarray(gt_rgb, dtype=np.float64)))
    terms = [ad.square(a - Tensor(b.data)).mean() for a, b in zip(resp_a, resp_b)]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


@dataclass
class LossWeights:
    """Coefficients of the overall objective. The distillation term and its
    sub-weights are carried for config compatibility but always inactive."""

    lambda_sds: float = 0.0
    lambda_rec: float = 1.0
    lambda_mask: float = 0.5
    lambda_proxy: float = 0.1
    alpha_pseudo: float = 0.0
    alpha_real: float = 0.0

    def __post_init__(self):
        for name in ("lambda_sds", "lambda_rec", "lambda_mask", "lambda_proxy",
                     "alpha_pseudo", "alpha_real"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


def total_loss(frames, gt_images, gt_masks, weights: LossWeights) -> Tensor:
    """Weighted sum of the active objectives, averaged over the sampled
    frames. All weights zero gives an exact 0."""
    if len(frames) != len(gt_images) or len(frames) != len(gt_masks):
        raise ShapeError("rendered and ground-truth sets differ in length")
    if not frames:
        return Tensor(0.0)
    total = None
    for frame, gt_img, gt_msk in zip(frames, gt_images, gt_masks):
        term = Tensor(0.0)
        if weights.lambda_rec:
            term = term + weights.lambda_rec * loss_rec(frame.rgb, gt_img)
        if weights.lambda_mask:
            term = term + weights.lambda_mask * loss_mask(frame.alpha, gt_msk)
        if weights.lambda_proxy:
            term = term + weights.lambda_proxy * loss_perceptual_proxy(frame.rgb, gt_img)
        total = term if total is None else total + term
    return total * (1.0 / len(frames))
