"""Full-reference quality metrics on the ``[0, 1]`` scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .scene_io import check_same_shape, dequantize, quantize

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    mse: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b) -> float:
    """``10 log10(1 / MSE)`` for unit peak; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def gaussian_kernel_1d(size=SSIM_WIN, sigma=SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable correlation, then crop to positions where the window fits.
    r = (len(kernel) - 1) // 2
    out = correlate1d(x, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return out[r:x.shape[0] - r, r:x.shape[1] - r]


def ssim_map(a, b, win=SSIM_WIN, sigma=SSIM_SIGMA, data_range=1.0) -> np.ndarray:
    """
    Per-position, per-channel SSIM over the valid region.

    Gaussian-weighted local statistics without sample-size correction,
    ``C1 = (0.01 L)^2`` and ``C2 = (0.03 L)^2``. Returns an array of shape
    ``(H - win + 1, W - win + 1, C)``.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < win:
        raise ValueError(f"SSIM needs images at least {win}x{win}, got {a.shape[:2]}")

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    kernel = gaussian_kernel_1d(win, sigma)

    maps = []
    for k in range(a.shape[2]):
        x, y = a[..., k], b[..., k]
        mu_x = _filter_valid(x, kernel)
        mu_y = _filter_valid(y, kernel)
        sxx = _filter_valid(x * x, kernel) - mu_x * mu_x
        syy = _filter_valid(y * y, kernel) - mu_y * mu_y
        sxy = _filter_valid(x * y, kernel) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
        maps.append(num / den)
    return np.stack(maps, axis=-1)


def ssim(a, b) -> float:
    return float(ssim_map(a, b).mean())


def evaluate_scene(result, ground_truth, quantized: bool = False) -> MetricReport:
    """
    PSNR, SSIM and MSE of ``result`` against ``ground_truth``.

    With ``quantized=True`` both images are first rounded to 8 bits, which
    mimics scoring from saved files.
    """
    result, ground_truth = _pair(result, ground_truth)
    if quantized:
        result = dequantize(quantize(result, 8), 8)
        ground_truth = dequantize(quantize(ground_truth, 8), 8)
    return MetricReport(psnr=psnr(result, ground_truth), ssim=ssim(result, ground_truth),
                        mse=mse(result, ground_truth))
