"""Procedural clean images, so corpora can be built without any downloads."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

KINDS = ("checkerboard", "gradient", "value_noise", "stripes", "blobs")


def _colors(rng, n):
    return rng.uniform(0.1, 0.9, size=(n, 3))


def checkerboard(size, rng):
    period = int(rng.integers(4, max(5, size // 4)))
    yy, xx = np.mgrid[:size, :size]
    phase = rng.integers(0, period, size=2)
    cells = (((yy + phase[0]) // period) + ((xx + phase[1]) // period)) % 2
    c = _colors(rng, 2)
    return np.where(cells[..., None] == 0, c[0], c[1])


def gradient(size, rng):
    theta = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[:size, :size] / max(size - 1, 1)
    t = np.cos(theta) * xx + np.sin(theta) * yy
    t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
    c = _colors(rng, 2)
    return c[0] * (1 - t[..., None]) + c[1] * t[..., None]


def value_noise(size, rng, octaves=4):
    """Multi-octave smoothly interpolated lattice noise (Perlin-style)."""
    out = np.zeros((size, size, 3))
    amp, total = 1.0, 0.0
    for o in range(octaves):
        cells = 2 ** (o + 1) + 1
        lattice = rng.uniform(0, 1, size=(cells, cells, 3))
        zoom = size / cells
        layer = ndimage.zoom(lattice, (zoom, zoom, 1), order=3, mode="reflect", grid_mode=True)
        out += amp * layer[:size, :size]
        total += amp
        amp *= 0.5
    out /= total
    lo, hi = out.min(), out.max()
    return 0.1 + 0.8 * (out - lo) / max(hi - lo, 1e-12)


def stripes(size, rng):
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(2, 8) * 2 * np.pi / size
    yy, xx = np.mgrid[:size, :size]
    t = 0.5 + 0.5 * np.sin(freq * (np.cos(theta) * xx + np.sin(theta) * yy) + rng.uniform(0, 6.3))
    c = _colors(rng, 2)
    return c[0] * (1 - t[..., None]) + c[1] * t[..., None]


def blobs(size, rng):
    out = np.broadcast_to(_colors(rng, 1)[0], (size, size, 3)).copy()
    yy, xx = np.mgrid[:size, :size]
    for _ in range(int(rng.integers(3, 8))):
        cy, cx = rng.uniform(0, size, 2)
        r = rng.uniform(size / 12, size / 4)
        w = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))[..., None]
        out = out * (1 - w) + _colors(rng, 1)[0] * w
    return out


_GENERATORS = {
    "checkerboard": checkerboard,
    "gradient": gradient,
    "value_noise": value_noise,
    "stripes": stripes,
    "blobs": blobs,
}


def procedural_texture(size: int, seed: int, kind: str | None = None) -> np.ndarray:
    """One ``size x size x 3`` float image in [0, 1].

    Without ``kind``, a random base texture is blended with value noise so
    that images carry both structure and fine detail.
    """
    rng = np.random.default_rng(seed)
    if kind is not None:
        return np.clip(_GENERATORS[kind](size, rng), 0.0, 1.0)
    base = _GENERATORS[KINDS[int(rng.integers(len(KINDS)))]](size, rng)
    detail = value_noise(size, rng)
    w = rng.uniform(0.2, 0.5)
    return np.clip((1 - w) * base + w * detail, 0.0, 1.0)


def write_procedural_dir(out_dir, count: int, size: int = 64, seed: int = 0) -> list[Path]:
    """Write ``count`` procedural PNGs to ``out_dir`` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        img = procedural_texture(size, seed=seed * 1_000_003 + i)
        p = out / f"tex_{i:05d}.png"
        Image.fromarray(to_uint8(img)).save(p)
        paths.append(p)
    return paths


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
