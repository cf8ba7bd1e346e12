"""Differentiable isotropic splat rasterizer.

Points are projected through a pinhole camera, given a 2-D Gaussian
footprint with pixel radius ``scale * focal / depth`` (floored at
``MIN_FOOTPRINT_PX``), truncated at three standard deviations, and
alpha-composited front to back:

    C = sum_k c_k a_k prod_{m<k} (1 - a_m) + T_final * background
    a_k = opacity_k * exp(-d^2 / (2 rho_k^2))

Per-element opacity is capped at ``ALPHA_MAX`` so the compositing backward,
which divides by (1 - a), stays finite. Gradients are registered for point
positions, scales, opacities, and colors; rotations do not affect the
isotropic footprint and are ignored here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .camera import Camera

TRUNCATION_SIGMAS = 3.0
MIN_FOOTPRINT_PX = 0.5
ALPHA_MAX = 0.9999


@dataclass
class RenderedFrame:
    """RGBA render; ``rgba`` is an (h, w, 4) tensor on the autodiff graph."""

    rgba: Tensor
    width: int
    height: int

    @property
    def rgb(self) -> Tensor:
        return self.rgba[:, :, :3]

    @property
    def alpha(self) -> Tensor:
        return self.rgba[:, :, 3]

    def rgb_array(self) -> np.ndarray:
        return self.rgba.data[:, :, :3].copy()

    def alpha_array(self) -> np.ndarray:
        return self.rgba.data[:, :, 3].copy()

    def mask_array(self, threshold: float = 0.5) -> np.ndarray:
        return (self.rgba.data[:, :, 3] > threshold).astype(np.float64)


def _segment_starts(sorted_ids: np.ndarray) -> np.ndarray:
    if sorted_ids.size == 0:
        return np.zeros(0, dtype=np.int64)
    changes = np.flatnonzero(np.diff(sorted_ids)) + 1
    return np.concatenate([[0], changes])


def splat_render(points, cam: Camera, background=(0.0, 0.0, 0.0)) -> RenderedFrame:
    """Render a Gaussian point set; see the module docstring for the model.

    ``points`` needs tensor attributes ``positions`` (N,3), ``scales`` (N,),
    ``opacities`` (N,) and ``colors`` (N,3). An empty set produces the
    background with zero alpha.
    """
    pos, sca = points.positions, points.scales
    opa, col = points.opacities, points.colors
    h, w = cam.height, cam.width
    bg = np.asarray(background, dtype=np.float64)
    f = cam.focal
    right, down, fwd = cam.basis()
    campos = np.asarray(cam.position, float)

    X = pos.data
    n_total = X.shape[0]
    rel = X - campos
    x_c, y_c, z_c = rel @ right, rel @ down, rel @ fwd

    visible = z_c > 1e-9
    safe_z = np.where(visible, z_c, 1.0)
    u = 0.5 * w + f * x_c / safe_z
    v = 0.5 * h + f * y_c / safe_z
    rho_raw = sca.data * f / safe_z
    clamped = rho_raw < MIN_FOOTPRINT_PX
    rho = np.where(clamped, MIN_FOOTPRINT_PX, rho_raw)
    rad = TRUNCATION_SIGMAS * rho

    ix0 = np.maximum(np.ceil(u - rad - 0.5), 0).astype(np.int64)
    ix1 = np.minimum(np.floor(u + rad - 0.5), w - 1).astype(np.int64)
    iy0 = np.maximum(np.ceil(v - rad - 0.5), 0).astype(np.int64)
    iy1 = np.minimum(np.floor(v + rad - 0.5), h - 1).astype(np.int64)
    nx, ny = ix1 - ix0 + 1, iy1 - iy0 + 1
    keep = visible & (nx > 0) & (ny > 0)

    kept = np.flatnonzero(keep)
    # Depth order with index tie-break keeps compositing deterministic.
    kept = kept[np.lexsort((kept, z_c[kept]))]

    out_data = np.empty((h, w, 4))
    out_data[:, :, :3] = bg
    out_data[:, :, 3] = 0.0

    if kept.size == 0:
        def backward_empty(grad):
            for t in (pos, sca, opa, col):
                if t.requires_grad:
                    t._accumulate(np.zeros_like(t.data))
        return RenderedFrame(ad.make_op(out_data, (pos, sca, opa, col), backward_empty), w, h)

    ku, kv, kz = u[kept], v[kept], z_c[kept]
    krho, krad = rho[kept], rad[kept]
    kxc, kyc = x_c[kept], y_c[kept]
    kclamped = clamped[kept]
    kcol = col.data[kept]
    kopa = opa.data[kept]
    knx = nx[kept]
    kx0, ky0 = ix0[kept], iy0[kept]

    counts = (knx * ny[kept]).astype(np.int64)
    starts_pt = np.concatenate([[0], np.cumsum(counts)[:-1]])
    m_total = int(counts.sum())
    pid = np.repeat(np.arange(kept.size), counts)
    within = np.arange(m_total) - starts_pt[pid]
    lx = within % knx[pid]
    ly = within // knx[pid]
    px = (kx0[pid] + lx) + 0.5
    py = (ky0[pid] + ly) + 0.5
    dx = px - ku[pid]
    dy = py - kv[pid]
    d2 = dx * dx + dy * dy
    inside = d2 <= krad[pid] ** 2

    pid, px, py, dx, dy, d2 = (arr[inside] for arr in (pid, px, py, dx, dy, d2))
    pix = ((py - 0.5).astype(np.int64) * w + (px - 0.5).astype(np.int64))

    order = np.argsort(pix, kind="stable")
    pid, dx, dy, d2, pix = pid[order], dx[order], dy[order], d2[order], pix[order]

    rho_e = krho[pid]
    g = np.exp(-d2 / (2.0 * rho_e * rho_e))
    a_raw = kopa[pid] * g
    a_capped = a_raw > ALPHA_MAX
    a = np.where(a_capped, ALPHA_MAX, a_raw)

    starts = _segment_starts(pix)
    lg = np.log1p(-a)
    cs = np.cumsum(lg)
    pre = cs - lg
    seg_len = np.diff(np.concatenate([starts, [pix.size]]))
    seg_of = np.repeat(np.arange(starts.size), seg_len)
    excl = pre - pre[starts][seg_of]
    T = np.exp(excl)
    wgt = T * a

    seg_pix = pix[starts]
    seg_T_final = np.exp(np.add.reduceat(lg, starts))
    contrib = np.add.reduceat(wgt[:, None] * kcol[pid], starts, axis=0)

    seg_iy, seg_ix = seg_pix // w, seg_pix % w
    out_data[seg_iy, seg_ix, :3] = contrib + seg_T_final[:, None] * bg
    out_data[seg_iy, seg_ix, 3] = 1.0 - seg_T_final

    def backward(grad):
        G = grad[:, :, :3].reshape(-1, 3)
        gA = grad[:, :, 3].reshape(-1)
        Gp = G[pix]
        Gc = np.einsum("ij,ij->i", Gp, kcol[pid])
        Gbg = G[seg_pix] @ bg
        gA_seg = gA[seg_pix]

        # Suffix sums of w*(G.c) within each pixel segment.
        wgc = wgt * Gc
        cs_wgc = np.cumsum(wgc)
        seg_tot = np.add.reduceat(wgc, starts)
        pre_wgc = cs_wgc - wgc
        seg_incl_excl = pre_wgc - pre_wgc[starts][seg_of]
        suffix = seg_tot[seg_of] - seg_incl_excl - wgc

        tail = (suffix + seg_T_final[seg_of] * (Gbg[seg_of] - gA_seg[seg_of]))
        da = T * Gc - tail / (1.0 - a)
        da = np.where(a_capped, 0.0, da)

        n_kept = kept.size
        dcol_k = np.stack(
            [np.bincount(pid, weights=wgt * Gp[:, c], minlength=n_kept) for c in range(3)],
            axis=1,
        )
        dsigma_k = np.bincount(pid, weights=da * g, minlength=n_kept)
        dg = da * kopa[pid]
        inv_rho2 = 1.0 / (rho_e * rho_e)
        du_e = dg * g * dx * inv_rho2
        dv_e = dg * g * dy * inv_rho2
        drho_e = dg * g * d2 * inv_rho2 / rho_e
        du_k = np.bincount(pid, weights=du_e, minlength=n_kept)
        dv_k = np.bincount(pid, weights=dv_e, minlength=n_kept)
        drho_k = np.bincount(pid, weights=drho_e, minlength=n_kept)
        drho_k = np.where(kclamped, 0.0, drho_k)

        dscale_k = drho_k * f / kz
        dz_k = du_k * (-f * kxc / kz**2) + dv_k * (-f * kyc / kz**2) \
            + drho_k * (-sca.data[kept] * f / kz**2)
        dX_k = (
            du_k[:, None] * (f / kz)[:, None] * right
            + dv_k[:, None] * (f / kz)[:, None] * down
            + dz_k[:, None] * fwd
        )

        if pos.requires_grad:
            full = np.zeros_like(pos.data)
            full[kept] = dX_k
            pos._accumulate(full)
        if sca.requires_grad:
            full = np.zeros(n_total)
            full[kept] = dscale_k
            sca._accumulate(full)
        if opa.requires_grad:
            full = np.zeros(n_total)
            full[kept] = dsigma_k
            opa._accumulate(full)
        if col.requires_grad:
            full = np.zeros_like(col.data)
            full[kept] = dcol_k
            col._accumulate(full)

    return RenderedFrame(ad.make_op(out_data, (pos, sca, opa, col), backward), w, h)
