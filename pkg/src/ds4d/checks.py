"""Registered finite-difference gradient checks.

Each check builds a fixed seeded instance, runs :func:`ds4d.nn.grad_check`,
and reports the max relative error against its tolerance. The composite
check exercises the full differentiable chain the trainer uses: fused
features -> deformation MLP -> apply -> splat render -> weighted loss.

Scorer biases are excluded from the fusion checks: a softmax over
per-view logits is shift-invariant, so their analytic gradient is exactly
zero and central differences only measure roundoff against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .camera import Camera
from .deform import apply_deformation, deform
from .fusion import da_fuse, ga_fuse
from .hexplane import hexplane_query, init_hexplane
from .losses import LossWeights
from .nn import grad_check, init_linear, init_mlp, linear_apply, mlp_apply, softmax
from .points import GaussianPointSet
from .render import splat_render
from .train import _batch_loss


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _check_linear() -> CheckResult:
    rng = np.random.default_rng(11)
    layer = init_linear(6, 4, rng)
    x = Tensor(rng.standard_normal((5, 6)), requires_grad=True, name="x")

    def loss():
        return ad.square(linear_apply(layer, x)).mean()

    err = grad_check(loss, layer.parameters() + [x], eps=1e-5)
    return CheckResult("linear_apply", err, 1e-6)


def _check_mlp() -> CheckResult:
    rng = np.random.default_rng(21)
    net = init_mlp(5, [16, 16], 3, rng)
    x = Tensor(rng.standard_normal(5), requires_grad=True, name="x")

    def loss():
        return ad.square(mlp_apply(net, x)).mean()

    err = grad_check(loss, net.parameters() + [x], eps=1e-3)
    return CheckResult("mlp_apply", err, 1e-6)


def _check_softmax_cross_entropy() -> CheckResult:
    rng = np.random.default_rng(13)
    logits = Tensor(rng.standard_normal(3), requires_grad=True, name="logits")

    def loss():
        return -ad.log(softmax(logits)[1])

    err = grad_check(loss, [logits], eps=1e-5)
    return CheckResult("softmax_cross_entropy", err, 1e-6)


def _fusion_instance(rng, n=5, v=4, w=6):
    # fully valid: masked entries would have structurally zero gradients,
    # which finite differences cannot resolve above roundoff
    feats = rng.standard_normal((n, v, w))
    valid = np.ones((n, v), dtype=bool)
    return Tensor(feats, requires_grad=True, name="feats"), valid


def _check_ga_fuse() -> CheckResult:
    rng = np.random.default_rng(14)
    feats, valid = _fusion_instance(rng)
    scorer = init_linear(6, 1, rng, name="scorer")

    def loss():
        return ad.square(ga_fuse(feats, valid, scorer).fused).mean()

    err = grad_check(loss, [feats, scorer.weight], eps=1e-5)
    return CheckResult("ga_fuse", err, 1e-6)


def _check_da_fuse() -> CheckResult:
    rng = np.random.default_rng(15)
    feats, valid = _fusion_instance(rng)
    scorer_a = init_linear(12, 1, rng, name="scorer_a")
    scorer_b = init_linear(12, 1, rng, name="scorer_b")

    def loss():
        return ad.square(da_fuse(feats, valid, scorer_a, scorer_b).fused).mean()

    err = grad_check(loss, [feats, scorer_a.weight, scorer_b.weight], eps=1e-5)
    return CheckResult("da_fuse", err, 1e-6)


def _check_hexplane() -> CheckResult:
    rng = np.random.default_rng(16)
    field = init_hexplane([-1, -1, -1], [1, 1, 1], rng, base_resolution=4,
                          level_multipliers=(1, 2), channels=3, init_noise=0.3)
    pos = Tensor(rng.uniform(-0.8, 0.8, (4, 3)), requires_grad=True, name="pos")

    def loss():
        return ad.square(hexplane_query(field, pos, 0.3)).mean()

    err = grad_check(loss, field.parameters() + [pos], eps=1e-5, max_entries=24)
    return CheckResult("hexplane_query", err, 1e-6)


def _render_instance(rng, n=4, size=16):
    pos = rng.uniform(-0.45, 0.45, (n, 3))
    pos[:, 2] = np.linspace(-0.3, 0.3, n)
    rot = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    pts = GaussianPointSet.from_arrays(
        pos, rng.uniform(0.08, 0.16, n), rot, rng.uniform(0.3, 0.85, n),
        rng.uniform(0.1, 0.9, (n, 3)), requires_grad=True)
    cam = Camera((0.2, 0.3, 3.0), (0, 0, 0), (0, 1, 0), 0.7, size, size)
    return pts, cam


def _check_renderer() -> CheckResult:
    rng = np.random.default_rng(17)
    pts, cam = _render_instance(rng)
    gt = rng.uniform(0, 1, (16, 16, 3))
    gt_mask = (rng.uniform(0, 1, (16, 16)) > 0.5).astype(np.float64)

    def loss():
        frame = splat_render(pts, cam, (0.2, 0.1, 0.3))
        return (ad.square(frame.rgb - gt).mean()
                + ad.square(frame.alpha - gt_mask).mean())

    params = [pts.positions, pts.scales, pts.opacities, pts.colors]
    err = grad_check(loss, params, eps=1e-5)
    return CheckResult("splat_render", err, 1e-4)


def _check_composite() -> CheckResult:
    """Fused features -> deform -> apply -> render -> total training loss."""
    rng = np.random.default_rng(18)
    pts, cam = _render_instance(rng)
    width = 12
    fused = Tensor(0.5 * rng.standard_normal((len(pts), width)),
                   requires_grad=True, name="fused")
    net = init_mlp(width, [16], 8, rng)
    for layer in net.layers:  # keep deformations small but nonzero
        layer.weight.data *= 0.1
        layer.bias.data *= 0.1
    gt = rng.uniform(0, 1, (16, 16, 3))
    gt_mask = (rng.uniform(0, 1, (16, 16)) > 0.5).astype(np.float64)
    weights = LossWeights(lambda_rec=1.0, lambda_mask=0.5, lambda_proxy=0.1)

    def loss():
        moved = apply_deformation(pts, deform(fused, net))
        frame = splat_render(moved, cam, (0.1, 0.1, 0.1))
        return _batch_loss([frame], [gt], [gt_mask], weights)[0]

    params = [fused, pts.positions, pts.scales, pts.opacities, pts.colors]
    params += net.parameters()
    err = grad_check(loss, params, eps=3e-5)
    return CheckResult("composite_pipeline", err, 1e-4)


ALL_CHECKS = (
    _check_linear,
    _check_mlp,
    _check_softmax_cross_entropy,
    _check_ga_fuse,
    _check_da_fuse,
    _check_hexplane,
    _check_renderer,
    _check_composite,
)


def run_gradchecks() -> list[CheckResult]:
    return [fn() for fn in ALL_CHECKS]
