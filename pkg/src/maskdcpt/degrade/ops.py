"""Synthetic degradation operators for the five supported families.

All operators take an ``H x W x C`` float image in ``[0, 1]`` and return a new
float64 array of the same shape; the input is never modified.  Stochastic
operators are fully determined by their ``seed`` argument.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import ndimage

from ..errors import InvalidParameterError


class Family(enum.IntEnum):
    """Degradation families, indexed in the order used for class labels."""

    HAZE = 0
    RAIN_STREAK = 1
    GAUSSIAN_NOISE = 2
    MOTION_BLUR = 3
    LOW_LIGHT = 4

    @property
    def abbrev(self) -> str:
        return _ABBREV[self]

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper()
        if key in cls.__members__:
            return cls[key]
        for fam, ab in _ABBREV.items():
            if ab.upper() == key:
                return fam
        raise InvalidParameterError(f"unknown degradation family {value!r}")


_ABBREV = {
    Family.HAZE: "H",
    Family.RAIN_STREAK: "RS",
    Family.GAUSSIAN_NOISE: "GN",
    Family.MOTION_BLUR: "MB",
    Family.LOW_LIGHT: "LL",
}

NUM_FAMILIES = len(Family)


def _as_image(gt) -> np.ndarray:
    img = np.asarray(gt, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3:
        raise InvalidParameterError(f"expected an HxWxC image, got shape {img.shape}")
    return img


def _restore_ndim(out: np.ndarray, ref) -> np.ndarray:
    return out[..., 0] if np.ndim(ref) == 2 else out


def line_offsets(length: int, angle_deg: float) -> np.ndarray:
    """Integer (dy, dx) offsets of a centred digital line of ``length`` cells.

    Steps one cell at a time along the dominant axis, so the line always has
    exactly ``length`` distinct cells.  Angles are counter-clockwise from the
    +x axis, with image rows growing downwards.
    """
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), -math.sin(theta)
    half = (length - 1) / 2.0
    t = np.arange(length, dtype=np.float64) - half
    if abs(c) >= abs(s):
        dx = t * np.sign(c if c != 0 else 1.0)
        dy = dx * (s / c)
    else:
        dy = t * np.sign(s)
        dx = dy * (c / s)
    return np.stack([np.rint(dy), np.rint(dx)], axis=1).astype(np.int64)


def motion_kernel(kernel_length: int, angle_deg: float) -> np.ndarray:
    """Normalized ``L x L`` linear motion kernel."""
    _check_kernel_length(kernel_length)
    k = np.zeros((kernel_length, kernel_length), dtype=np.float64)
    center = kernel_length // 2
    offs = line_offsets(kernel_length, angle_deg) + center
    offs = np.clip(offs, 0, kernel_length - 1)
    k[offs[:, 0], offs[:, 1]] = 1.0
    return k / k.sum()


def _check_kernel_length(kernel_length) -> None:
    if int(kernel_length) != kernel_length or kernel_length % 2 == 0:
        raise InvalidParameterError(f"kernel_length must be an odd integer, got {kernel_length}")
    if not 3 <= kernel_length <= 31:
        raise InvalidParameterError(f"kernel_length must lie in [3, 31], got {kernel_length}")


def apply_gaussian_noise(gt, sigma: float, seed: int) -> np.ndarray:
    """Additive white Gaussian noise; ``sigma`` is in 8-bit units."""
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    img = _as_image(gt)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma / 255.0, size=img.shape)
    return _restore_ndim(np.clip(img + noise, 0.0, 1.0), gt)


def apply_motion_blur(gt, kernel_length: int, angle_deg: float = 0.0) -> np.ndarray:
    img = _as_image(gt)
    k = motion_kernel(int(kernel_length), angle_deg)
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        out[..., ch] = ndimage.convolve(img[..., ch], k, mode="reflect")
    return _restore_ndim(np.clip(out, 0.0, 1.0), gt)


def depth_ramp(height: int, width: int) -> np.ndarray:
    """Synthetic depth: 0 on the top row, 1 on the bottom row."""
    if height == 1:
        return np.zeros((1, width))
    return np.repeat(np.linspace(0.0, 1.0, height)[:, None], width, axis=1)


def apply_haze(gt, beta: float, airlight: float = 0.9) -> np.ndarray:
    """Atmospheric scattering ``I = J t + A (1 - t)`` with ``t = exp(-beta d)``."""
    if not beta > 0:
        raise InvalidParameterError(f"beta must be > 0, got {beta}")
    if not 0.7 <= airlight <= 1.0:
        raise InvalidParameterError(f"airlight must lie in [0.7, 1.0], got {airlight}")
    img = _as_image(gt)
    t = np.exp(-beta * depth_ramp(img.shape[0], img.shape[1]))[..., None]
    out = img * t + airlight * (1.0 - t)
    return _restore_ndim(np.clip(out, 0.0, 1.0), gt)


def rain_layer(
    height: int,
    width: int,
    streak_density: float,
    angle_deg: float,
    seed: int,
    streak_length: int = 9,
    intensity: tuple[float, float] = (0.25, 0.5),
) -> np.ndarray:
    """Nonnegative ``H x W`` streak layer covering about ``streak_density`` of pixels.

    Streaks wrap around the borders so coverage does not depend on position.
    """
    if not 0 < streak_density <= 0.2:
        raise InvalidParameterError(f"streak_density must lie in (0, 0.2], got {streak_density}")
    rng = np.random.default_rng(seed)
    n_streaks = max(1, int(round(streak_density * height * width / streak_length)))
    ys = rng.integers(0, height, size=n_streaks)
    xs = rng.integers(0, width, size=n_streaks)
    vals = rng.uniform(intensity[0], intensity[1], size=n_streaks)
    offs = line_offsets(streak_length, angle_deg)
    rows = (ys[:, None] + offs[None, :, 0]) % height
    cols = (xs[:, None] + offs[None, :, 1]) % width
    layer = np.zeros((height, width), dtype=np.float64)
    np.maximum.at(layer, (rows.ravel(), cols.ravel()), np.repeat(vals, streak_length))
    return layer


def apply_rain_streaks(
    gt, streak_density: float, angle_deg: float = 90.0, seed: int = 0, streak_length: int = 9
) -> np.ndarray:
    img = _as_image(gt)
    layer = rain_layer(img.shape[0], img.shape[1], streak_density, angle_deg, seed, streak_length)
    out = img + layer[..., None]
    return _restore_ndim(np.clip(out, 0.0, 1.0), gt)


def apply_low_light(
    gt, gamma: float, scale: float, read_noise_sigma: float = 0.0, seed: int = 0
) -> np.ndarray:
    """Gamma darkening ``scale * gt**gamma`` plus Gaussian read noise (8-bit units)."""
    if gamma < 1:
        raise InvalidParameterError(f"gamma must be >= 1 to darken, got {gamma}")
    if not 0 < scale <= 1:
        raise InvalidParameterError(f"scale must lie in (0, 1], got {scale}")
    if read_noise_sigma < 0:
        raise InvalidParameterError(f"read_noise_sigma must be >= 0, got {read_noise_sigma}")
    img = _as_image(gt)
    out = scale * np.power(img, gamma)
    if read_noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, read_noise_sigma / 255.0, size=img.shape)
    return _restore_ndim(np.clip(out, 0.0, 1.0), gt)


# Documented parameter domains, checked by DegradationSpec.validate.
PARAM_DOMAINS: dict[Family, dict[str, tuple[float, float]]] = {
    Family.HAZE: {"beta": (0.0, 3.0), "airlight": (0.7, 1.0)},
    Family.RAIN_STREAK: {"streak_density": (0.0, 0.2), "angle_deg": (-180.0, 180.0)},
    Family.GAUSSIAN_NOISE: {"sigma": (1.0, 100.0)},
    Family.MOTION_BLUR: {"kernel_length": (3, 31), "angle_deg": (-180.0, 180.0)},
    Family.LOW_LIGHT: {"gamma": (1.5, 4.0), "scale": (0.0, 1.0), "read_noise_sigma": (0.0, 25.0)},
}

# Default sampling ranges used by build_corpus.
DEFAULT_PARAM_RANGES: dict[Family, dict[str, tuple[float, float]]] = {
    Family.HAZE: {"beta": (0.8, 2.0), "airlight": (0.75, 0.95)},
    Family.RAIN_STREAK: {"streak_density": (0.03, 0.08), "angle_deg": (70.0, 110.0)},
    Family.GAUSSIAN_NOISE: {"sigma": (15.0, 50.0)},
    Family.MOTION_BLUR: {"kernel_length": (5, 11), "angle_deg": (0.0, 180.0)},
    Family.LOW_LIGHT: {"gamma": (1.5, 2.5), "scale": (0.25, 0.5), "read_noise_sigma": (0.0, 4.0)},
}


@dataclass(frozen=True)
class DegradationSpec:
    """A degradation family with concrete parameters and the seed that realizes it."""

    family: Family
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "params", dict(self.params))

    def validate(self) -> "DegradationSpec":
        domain = PARAM_DOMAINS[self.family]
        p = self.params
        required = {
            Family.HAZE: ("beta",),
            Family.RAIN_STREAK: ("streak_density",),
            Family.GAUSSIAN_NOISE: ("sigma",),
            Family.MOTION_BLUR: ("kernel_length",),
            Family.LOW_LIGHT: ("gamma", "scale"),
        }[self.family]
        for name in required:
            if name not in p:
                raise InvalidParameterError(f"{self.family.name} requires parameter {name!r}")
        for name, value in p.items():
            if name not in domain:
                raise InvalidParameterError(f"{self.family.name} has no parameter {name!r}")
            lo, hi = domain[name]
            if not lo <= value <= hi:
                raise InvalidParameterError(f"{name}={value} outside [{lo}, {hi}]")
        if self.family is Family.HAZE and not p["beta"] > 0:
            raise InvalidParameterError("beta must be > 0")
        if self.family is Family.RAIN_STREAK and not p["streak_density"] > 0:
            raise InvalidParameterError("streak_density must be > 0")
        if self.family is Family.MOTION_BLUR:
            _check_kernel_length(p["kernel_length"])
        return self

    def apply(self, gt) -> np.ndarray:
        self.validate()
        p = self.params
        fam = self.family
        if fam is Family.HAZE:
            return apply_haze(gt, p["beta"], p.get("airlight", 0.9))
        if fam is Family.RAIN_STREAK:
            return apply_rain_streaks(gt, p["streak_density"], p.get("angle_deg", 90.0), self.seed)
        if fam is Family.GAUSSIAN_NOISE:
            return apply_gaussian_noise(gt, p["sigma"], self.seed)
        if fam is Family.MOTION_BLUR:
            return apply_motion_blur(gt, int(p["kernel_length"]), p.get("angle_deg", 0.0))
        return apply_low_light(gt, p["gamma"], p["scale"], p.get("read_noise_sigma", 0.0), self.seed)

    def to_dict(self) -> dict:
        return {"family": self.family.name, "params": dict(self.params), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DegradationSpec":
        return cls(Family.parse(d["family"]), d.get("params", {}), int(d.get("seed", 0)))


@dataclass
class PairedSample:
    lq: np.ndarray
    gt: np.ndarray
    spec: DegradationSpec
    id: str

    def __post_init__(self):
        if self.lq.shape != self.gt.shape:
            raise InvalidParameterError(
                f"lq shape {self.lq.shape} differs from gt shape {self.gt.shape}"
            )

    @property
    def label(self) -> int:
        return int(self.spec.family)
