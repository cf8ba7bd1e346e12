"""Per-point deformation: MLP heads and application to a point set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError
from .nn import Mlp, mlp_apply
from .points import GaussianPointSet

HEAD_WIDTH = 8  # 3 position + 1 log-scale + 4 rotation increment


@dataclass
class Deformation:
    """Offsets for one timestamp: positions add, scales scale by exp, and
    the rotation increment is 1 + dq applied by quaternion product, so a
    zero deformation is the identity."""

    d_pos: Tensor
    d_scale: Tensor
    d_rot: Tensor

    @classmethod
    def zero(cls, n: int) -> "Deformation":
        return cls(Tensor(np.zeros((n, 3))), Tensor(np.zeros(n)), Tensor(np.zeros((n, 4))))


def deform(fused: Tensor, net: Mlp) -> Deformation:
    """Split the deformation MLP output into (dX, ds, dq) heads."""
    if net.in_dim != fused.shape[1]:
        raise ShapeError(
            f"deformation net expects width {net.in_dim}, got {fused.shape[1]}")
    if net.out_dim != HEAD_WIDTH:
        raise ShapeError(f"deformation net must output {HEAD_WIDTH} channels")
    out = mlp_apply(net, fused)
    return Deformation(d_pos=out[:, 0:3], d_scale=out[:, 3], d_rot=out[:, 4:8])


def quat_multiply(q: Tensor, r: Tensor) -> Tensor:
    """Hamilton product of (N, 4) quaternion batches, (w, x, y, z) order."""
    qw, qx, qy, qz = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    rw, rx, ry, rz = r[:, 0], r[:, 1], r[:, 2], r[:, 3]
    return ad.stack([
        qw * rw - qx * rx - qy * ry - qz * rz,
        qw * rx + qx * rw + qy * rz - qz * ry,
        qw * ry - qx * rz + qy * rw + qz * rx,
        qw * rz + qx * ry - qy * rx + qz * rw,
    ], axis=1)


def quat_normalize(q: Tensor) -> Tensor:
    norm = ad.sqrt(ad.square(q).sum(axis=1, keepdims=True))
    return q / norm


IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def apply_deformation(points: GaussianPointSet, d: Deformation) -> GaussianPointSet:
    """Deformed point set; opacity and color pass through untouched."""
    n = len(points)
    if d.d_pos.shape != (n, 3):
        raise ShapeError(f"deformation covers {d.d_pos.shape[0]} points, set has {n}")
    q_eff = d.d_rot + Tensor(np.broadcast_to(IDENTITY_QUAT, (n, 4)).copy())
    return GaussianPointSet(
        positions=points.positions + d.d_pos,
        scales=points.scales * ad.exp(d.d_scale),
        rotations=quat_normalize(quat_multiply(q_eff, points.rotations)),
        opacities=points.opacities,
        colors=points.colors,
    )


def invert_deformation(d: Deformation) -> Deformation:
    """Analytic inverse in the same increment parameterization."""
    q_eff = d.d_rot.data + IDENTITY_QUAT
    conj = q_eff * np.array([1.0, -1.0, -1.0, -1.0])
    inv = conj / np.sum(q_eff * q_eff, axis=1, keepdims=True)
    return Deformation(
        d_pos=Tensor(-d.d_pos.data),
        d_scale=Tensor(-d.d_scale.data),
        d_rot=Tensor(inv - IDENTITY_QUAT),
    )
