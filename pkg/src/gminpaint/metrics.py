"""PSNR and SSIM for 8-bit grayscale images."""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, EmptyRegion
from .imageio import GrayImage, InpaintMask

PEAK = 255.0

# Wang et al. defaults
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_array(img):
    return img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)


def psnr(reference, test, region: InpaintMask | np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB, ``math.inf`` for identical inputs.

    ``region`` restricts the error to selected pixels (e.g. the inpainting
    mask); ``None`` uses the whole image.
    """
    ref, tst = _as_array(reference), _as_array(test)
    if ref.shape != tst.shape:
        raise DimensionMismatch(f"image shapes differ: {ref.shape} vs {tst.shape}")
    if region is not None:
        sel = region.unknown if isinstance(region, InpaintMask) else np.asarray(region, dtype=bool)
        if sel.shape != ref.shape:
            raise DimensionMismatch(f"region {sel.shape} does not match images {ref.shape}")
        if not sel.any():
            raise EmptyRegion("PSNR region selects no pixels")
        ref, tst = ref[sel], tst[sel]
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(x, w):
    win = np.lib.stride_tricks.sliding_window_view(x, w.shape)
    return np.einsum("ijkl,kl->ij", win, w)


def ssim_map(reference, test, data_range: float = PEAK) -> np.ndarray:
    """Local SSIM over every fully-contained 11x11 Gaussian window."""
    x, y = _as_array(reference), _as_array(test)
    if x.shape != y.shape:
        raise DimensionMismatch(f"image shapes differ: {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise DimensionMismatch(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _filter_valid(x, w), _filter_valid(y, w)
    vx = _filter_valid(x * x, w) - mx * mx
    vy = _filter_valid(y * y, w) - my * my
    cxy = _filter_valid(x * y, w) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num / den


def ssim(reference, test) -> float:
    """Mean structural similarity (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, L=255)."""
    return float(ssim_map(reference, test).mean())
