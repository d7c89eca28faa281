"""Patch-level masks and their application to images.

A :class:`MaskMap` stores a boolean patch grid where ``True`` marks a KEPT
patch.  Masks are realized with an exact masked-patch count,
``round(ratio * P)`` with halves rounded up, so sweeps over the ratio carry no
sampling noise.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidShapeError


class MaskingMethod(str, enum.Enum):
    RANDOM = "random"
    SQUARE = "square"
    BLOCK_WISE = "block_wise"

    @classmethod
    def parse(cls, value) -> "MaskingMethod":
        if isinstance(value, MaskingMethod):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise InvalidParameterError(f"unknown masking method {value!r}")


@dataclass(frozen=True)
class MaskMap:
    patch_size: int
    grid: np.ndarray  # (H/p, W/p) bool, True = KEPT
    method: MaskingMethod = MaskingMethod.RANDOM
    seed: int = 0

    @property
    def num_patches(self) -> int:
        return int(self.grid.size)

    @property
    def num_masked(self) -> int:
        return int(self.grid.size - np.count_nonzero(self.grid))

    @property
    def ratio(self) -> float:
        return self.num_masked / self.num_patches

    @property
    def height(self) -> int:
        return self.grid.shape[0] * self.patch_size

    @property
    def width(self) -> int:
        return self.grid.shape[1] * self.patch_size

    def pixel_kept(self) -> np.ndarray:
        """Boolean ``H x W`` map, True on kept pixels."""
        p = self.patch_size
        return np.repeat(np.repeat(self.grid, p, axis=0), p, axis=1)

    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "patch_size": self.patch_size,
                "height": self.height,
                "width": self.width,
                "ratio": self.ratio,
                "method": self.method.value,
                "seed": int(self.seed),
            },
            sort_keys=True,
        ).encode()
        bits = np.packbits(self.grid.ravel().astype(np.uint8)).tobytes()
        return struct.pack("<I", len(header)) + header + bits

    @classmethod
    def from_bytes(cls, data: bytes) -> "MaskMap":
        (n,) = struct.unpack_from("<I", data, 0)
        header = json.loads(data[4 : 4 + n])
        p = header["patch_size"]
        gh, gw = header["height"] // p, header["width"] // p
        bits = np.frombuffer(data[4 + n :], dtype=np.uint8)
        grid = np.unpackbits(bits)[: gh * gw].astype(bool).reshape(gh, gw)
        return cls(p, grid, MaskingMethod.parse(header["method"]), header["seed"])


def masked_count(ratio: float, total: int) -> int:
    return int(math.floor(ratio * total + 0.5))


def _check_grid(height: int, width: int, patch_size: int) -> tuple[int, int]:
    if patch_size < 1:
        raise InvalidParameterError(f"patch_size must be >= 1, got {patch_size}")
    if height % patch_size or width % patch_size:
        raise InvalidShapeError(
            f"image {height}x{width} is not divisible by patch size {patch_size}"
        )
    return height // patch_size, width // patch_size


def _square_order(gh: int, gw: int, rng: np.random.Generator) -> np.ndarray:
    """Patch indices ordered outwards from the grid centre in square rings."""
    yy, xx = np.mgrid[:gh, :gw]
    cy, cx = (gh - 1) / 2.0, (gw - 1) / 2.0
    cheb = np.maximum(np.abs(yy - cy), np.abs(xx - cx)).ravel()
    eucl = ((yy - cy) ** 2 + (xx - cx) ** 2).ravel()
    jitter = rng.permutation(gh * gw)
    return np.lexsort((jitter, eucl, cheb))


def _block_wise(gh: int, gw: int, n_mask: int, rng: np.random.Generator) -> np.ndarray:
    """Union of random rectangles (BEiT-style) trimmed to exactly ``n_mask`` patches."""
    masked = np.zeros((gh, gw), dtype=bool)
    min_area = 1 if n_mask < 4 else 4
    failures = 0
    while masked.sum() < n_mask:
        need = n_mask - int(masked.sum())
        area = rng.uniform(min_area, max(min_area, need))
        aspect = math.exp(rng.uniform(math.log(0.3), math.log(1 / 0.3)))
        h = int(round(math.sqrt(area * aspect)))
        w = int(round(math.sqrt(area / aspect)))
        h, w = max(1, min(h, gh)), max(1, min(w, gw))
        top = int(rng.integers(0, gh - h + 1))
        left = int(rng.integers(0, gw - w + 1))
        block = np.zeros_like(masked)
        block[top : top + h, left : left + w] = True
        fresh = np.flatnonzero(block & ~masked)
        if fresh.size == 0:
            failures += 1
            if failures > 50:
                # Saturated: grow the masked region by unmasked neighbours.
                fresh = np.flatnonzero(~masked)
                rng.shuffle(fresh)
            else:
                continue
        masked.flat[fresh[:need]] = True
    return masked


def generate_mask(
    height: int,
    width: int,
    patch_size: int = 16,
    ratio: float = 0.5,
    method="random",
    seed: int = 0,
) -> MaskMap:
    """Mask exactly ``round(ratio * P)`` of the ``P`` patches of an image.

    ``random`` samples patches uniformly without replacement, ``square`` masks
    one region centred on the grid and ``block_wise`` masks a union of random
    rectangles.
    """
    if not 0.0 <= ratio <= 1.0:
        raise InvalidParameterError(f"ratio must lie in [0, 1], got {ratio}")
    gh, gw = _check_grid(height, width, patch_size)
    method = MaskingMethod.parse(method)
    total = gh * gw
    n_mask = masked_count(ratio, total)
    rng = np.random.default_rng(seed)
    if method is MaskingMethod.RANDOM:
        masked = np.zeros(total, dtype=bool)
        masked[rng.choice(total, size=n_mask, replace=False)] = True
        masked = masked.reshape(gh, gw)
    elif method is MaskingMethod.SQUARE:
        masked = np.zeros(total, dtype=bool)
        masked[_square_order(gh, gw, rng)[:n_mask]] = True
        masked = masked.reshape(gh, gw)
    else:
        masked = _block_wise(gh, gw, n_mask, rng)
    return MaskMap(patch_size, ~masked, method, seed)


def apply_mask(x, m: MaskMap, fill: float = 0.0) -> np.ndarray:
    """Hadamard product of an image with the pixel-level mask.

    ``x`` may be ``H x W`` or ``H x W x C``; masked pixels become ``fill``.
    """
    x = np.asarray(x)
    if x.shape[:2] != (m.height, m.width):
        raise InvalidShapeError(
            f"mask covers {m.height}x{m.width} but image is {x.shape[0]}x{x.shape[1]}"
        )
    kept = m.pixel_kept()
    if x.ndim == 3:
        kept = kept[..., None]
    return np.where(kept, x, np.asarray(fill, dtype=x.dtype))


def mask_ratio_of(m: MaskMap) -> float:
    return m.ratio


def adjacency_count(m: MaskMap) -> int:
    """Number of 4-neighbour patch pairs where one is kept and the other masked."""
    g = m.grid
    return int(np.count_nonzero(g[1:] != g[:-1]) + np.count_nonzero(g[:, 1:] != g[:, :-1]))


def expected_random_adjacency(gh: int, gw: int, n_mask: int) -> float:
    """Expected kept/masked neighbour pairs for a uniformly random mask."""
    total = gh * gw
    if total < 2:
        return 0.0
    pairs = gh * (gw - 1) + gw * (gh - 1)
    p_diff = 2.0 * n_mask * (total - n_mask) / (total * (total - 1))
    return pairs * p_diff
