import math

import numpy as np
import pytest

from maskdcpt.errors import InvalidShapeError
from maskdcpt.metrics import C1, C2, gaussian_window, psnr, ssim


def naive_psnr(a, b):
    total, n = 0.0, 0
    for idx in np.ndindex(a.shape):
        total += (float(a[idx]) - float(b[idx])) ** 2
        n += 1
    return 10 * math.log10(1.0 / (total / n))


def naive_ssim(a, b, size=11, sigma=1.5):
    """Explicit loops over channels, window positions and window taps."""
    half = (size - 1) / 2
    g = [[math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma**2)) for j in range(size)] for i in range(size)]
    norm = sum(sum(r) for r in g)
    g = [[v / norm for v in r] for r in g]
    h, w, c = a.shape
    vals = []
    for ch in range(c):
        for y in range(h - size + 1):
            for x in range(w - size + 1):
                ma = mb = saa = sbb = sab = 0.0
                for i in range(size):
                    for j in range(size):
                        wa, wb = a[y + i, x + j, ch], b[y + i, x + j, ch]
                        ma += g[i][j] * wa
                        mb += g[i][j] * wb
                for i in range(size):
                    for j in range(size):
                        da, db = a[y + i, x + j, ch] - ma, b[y + i, x + j, ch] - mb
                        saa += g[i][j] * da * da
                        sbb += g[i][j] * db * db
                        sab += g[i][j] * da * db
                vals.append(((2 * ma * mb + C1) * (2 * sab + C2)) / ((ma * ma + mb * mb + C1) * (saa + sbb + C2)))
    return sum(vals) / len(vals)


class TestPSNR:
    def test_identical_is_infinite(self):
        x = np.random.default_rng(0).uniform(size=(8, 8, 3))
        assert psnr(x, x) == math.inf

    def test_half_gap(self):
        assert abs(psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 0.5)) - 6.020599913279624) < 1e-6

    def test_mse_1e4(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.01)
        assert abs(psnr(a, b) - 40.0) < 1e-9

    def test_naive_agreement_and_symmetry(self, rng):
        for _ in range(10):
            a, b = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
            assert abs(psnr(a, b) - naive_psnr(a, b)) < 1e-6
            assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidShapeError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSSIM:
    def test_window_normalized(self):
        assert abs(gaussian_window().sum() - 1) < 1e-15

    def test_identical(self, rng):
        x = rng.uniform(size=(20, 24, 3))
        assert abs(ssim(x, x) - 1.0) < 1e-9

    def test_constants_closed_form(self):
        a, b = 0.2, 0.4
        expected = (2 * a * b + C1) / (a * a + b * b + C1)
        assert abs(expected - 0.1601 / 0.2001) < 1e-15
        got = ssim(np.full((16, 16, 3), a), np.full((16, 16, 3), b))
        assert abs(got - expected) < 1e-6
        assert abs(got - 0.8000999500249875) < 1e-6

    def test_inverted_pattern_low(self):
        yy, xx = np.mgrid[:32, :32]
        gt = (0.5 + 0.3 * np.sin(xx / 3.0) * np.cos(yy / 4.0))[..., None].repeat(3, axis=2)
        assert ssim(1 - gt, gt) < 0.5

    def test_naive_agreement(self, rng):
        for _ in range(3):
            a, b = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
            assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-6
        a = rng.uniform(size=(16, 16, 3))
        b = np.clip(a + rng.normal(0, 0.05, size=a.shape), 0, 1)
        assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-6

    def test_too_small(self):
        with pytest.raises(InvalidShapeError):
            ssim(np.zeros((10, 10)), np.zeros((10, 10)))
