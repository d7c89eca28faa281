"""Full-reference image quality metrics, computed on RGB at a data range of 1."""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from .errors import InvalidShapeError

C1 = 0.01**2
C2 = 0.03**2


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    return x, y


def psnr(pred, gt, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` when the images are equal.

    Parameters
    ----------
    pred, gt : array_like
      Images of identical shape.
    data_range : float
      Peak-to-peak range of valid values.
    """
    x, y = _pair(pred, gt)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(pred, gt, window: int = 11, sigma: float = 1.5, data_range: float = 1.0) -> float:
    """Mean structural similarity over all valid window positions and channels.

    Parameters
    ----------
    pred, gt : array_like
      ``H x W`` or ``H x W x C`` images of identical shape.
    window : int
      Side of the Gaussian window; both image sides must be at least this.
    sigma : float
      Standard deviation of the Gaussian window.
    """
    x, y = _pair(pred, gt)
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if min(x.shape[:2]) < window:
        raise InvalidShapeError(f"image {x.shape[:2]} smaller than the {window}x{window} window")
    w = gaussian_window(window, sigma)
    c1, c2 = C1 * data_range**2, C2 * data_range**2
    vals = []
    for ch in range(x.shape[2]):
        a, b = x[..., ch], y[..., ch]

        def filt(z):
            return signal.correlate(z, w, mode="valid", method="direct")

        mu_a, mu_b = filt(a), filt(b)
        saa = filt(a * a) - mu_a**2
        sbb = filt(b * b) - mu_b**2
        sab = filt(a * b) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
        vals.append(num / den)
    return float(np.mean(vals))
