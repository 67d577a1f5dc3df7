"""Full-reference image quality metrics: MSE, PSNR, and Gaussian-window SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d


@dataclass(frozen=True)
class SsimParams:
    """Structural-similarity parameters (Gaussian window, stabilizers, value range)."""

    window_size: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be an odd integer >= 3")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")


def _check_pair(a: np.ndarray, b: np.ndarray):
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("images must have the same shape")
    if x.ndim not in (2, 3):
        raise ValueError("images must be (H, W) or (H, W, C)")
    return x, y


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all pixels and channels.

    Parameters
    ----------
    a, b : ndarray
        Same-shape images, (H, W) or (H, W, C).

    Returns
    -------
    float
        ``mean((a - b)^2)``.
    """
    x, y = _check_pair(a, b)
    d = x - y
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``inf``.

    ``10 log10(max_value^2 / mse)``.
    """
    if max_value <= 0:
        raise ValueError("max_value must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return float(10.0 * math.log10(max_value * max_value / err))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _windowed(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(img, kernel, axis=0, mode="nearest")
    return correlate1d(out, kernel, axis=1, mode="nearest")


def ssim(a: np.ndarray, b: np.ndarray, params: SsimParams | None = None) -> float:
    """Mean structural similarity over the fully-windowed (no padding) region.

    Local means/variances/covariance come from a separable normalized Gaussian
    window; the similarity map

        ``((2 mu_x mu_y + c1)(2 cov + c2)) /
        ((mu_x^2 + mu_y^2 + c1)(var_x + var_y + c2))``

    is averaged over pixels whose window lies entirely inside the image, then
    over channels. ``c1 = (k1 L)^2``, ``c2 = (k2 L)^2`` for data range L.

    Returns
    -------
    float
        Value in [-1, 1]; 1 for identical inputs.
    """
    if params is None:
        params = SsimParams()
    x, y = _check_pair(a, b)
    if x.ndim == 2:
        x = x[:, :, None]
        y = y[:, :, None]
    H, W = x.shape[:2]
    ws = params.window_size
    if H < ws or W < ws:
        raise ValueError(f"images must be at least {ws}x{ws} for this window")
    kernel = _gaussian_kernel(ws, params.gaussian_sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    half = ws // 2
    crop = (slice(half, H - half), slice(half, W - half))

    vals = []
    for ch in range(x.shape[2]):
        xc = x[:, :, ch]
        yc = y[:, :, ch]
        mu_x = _windowed(xc, kernel)
        mu_y = _windowed(yc, kernel)
        var_x = _windowed(xc * xc, kernel) - mu_x * mu_x
        var_y = _windowed(yc * yc, kernel) - mu_y * mu_y
        cov = _windowed(xc * yc, kernel) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        vals.append(np.mean((num / den)[crop]))
    return float(np.mean(vals))
