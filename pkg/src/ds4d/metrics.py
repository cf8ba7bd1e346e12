"""Image quality metrics: PSNR, windowed SSIM, and D-SSIM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

LUMA = np.array([0.299, 0.587, 0.114])

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def _ssim_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2 * SSIM_SIGMA**2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _ssim_window()


def _to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ LUMA
    if img.ndim == 2:
        return img
    raise ShapeError(f"expected (h, w) or (h, w, 3) image, got {img.shape}")


def _windowed_mean(img: np.ndarray) -> np.ndarray:
    views = np.lib.stride_tricks.sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
    return np.einsum("ijab,ab->ij", views, _WINDOW)


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean local SSIM over valid 11x11 Gaussian windows on the luma."""
    ga, gb = _to_gray(a), _to_gray(b)
    if ga.shape != gb.shape:
        raise ShapeError(f"image shapes differ: {ga.shape} vs {gb.shape}")
    if min(ga.shape) < SSIM_WINDOW:
        raise DomainError(
            f"image {ga.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _windowed_mean(ga)
    mu_b = _windowed_mean(gb)
    var_a = _windowed_mean(ga * ga) - mu_a**2
    var_b = _windowed_mean(gb * gb) - mu_b**2
    cov = _windowed_mean(ga * gb) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def dssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Structural dissimilarity (1 - SSIM) / 2."""
    return (1.0 - ssim(a, b, peak)) / 2.0


@dataclass
class MetricReport:
    """Per-frame metrics on held-out views, plus aggregate means."""

    entries: list = field(default_factory=list)  # (i, j, psnr, ssim, dssim)

    def add(self, i: int, j: int, rendered: np.ndarray, gt: np.ndarray) -> None:
        s = ssim(rendered, gt)
        self.entries.append((i, j, psnr(rendered, gt), s, (1.0 - s) / 2.0))

    def _mean(self, idx: int) -> float:
        vals = [e[idx] for e in self.entries]
        finite = [v for v in vals if np.isfinite(v)]
        if not vals:
            return float("nan")
        return float(np.mean(finite)) if finite else float("inf")

    @property
    def mean_psnr(self) -> float:
        return self._mean(2)

    @property
    def mean_ssim(self) -> float:
        return self._mean(3)

    @property
    def mean_dssim(self) -> float:
        return self._mean(4)

    def rows(self) -> list:
        return list(self.entries)
