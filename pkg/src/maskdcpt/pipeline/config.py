"""Training configuration, readable from and writable to JSON.

Keys (all optional, defaults in brackets):

``mode``               ``pretrain`` or ``finetune`` [pretrain]
``iterations``         optimizer steps [2000]
``batch_size``         samples per step [8]
``crop_size``          square random crop side [64]
``lr_encoder``         encoder learning rate; fine-tune start rate [3e-4]
``lr_decoder``         decoder learning rate (pre-training only) [1e-4]
``lr_min``             fine-tune cosine floor [1e-6]
``mask_ratio``         fraction of masked patches [0.5]
``mask_patch``         patch side in pixels [8]
``mask_method``        ``random`` | ``square`` | ``block_wise`` [random]
``alpha``              pixel-loss weight [1.0]
``gamma``              focal-loss focusing parameter [2.0]
``seed``               master seed [0]
``encoder``            ``{num_blocks, channels, topology}`` [8 blocks, 32/64, plain]
``cls_width``          classifier base width [16]
``repeat_factors``     family -> integer repetition, e.g. ``{"RS": 300}`` [all 1]
``flip``               random horizontal flips [true]
``checkpoint_every``   periodic checkpoint interval, 0 = final only [0]
``probe_points``       evenly spaced kNN probe snapshots, 0 = off [5]
``probe_crop``         probe centre-crop side [32]
``probe_k``            neighbours in the probe [5]
``probe_repeats``      seeds averaged per probe [5]
``holdout_fraction``   per-family share held out for evaluation [0.2]

Gradient clipping and EMA are deliberately not supported.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import InvalidParameterError
from ..masking import MaskingMethod
from ..model.encoder import EncoderConfig


class Mode(str, enum.Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


@dataclass
class TrainConfig:
    mode: Mode = Mode.PRETRAIN
    iterations: int = 2000
    batch_size: int = 8
    crop_size: int = 64
    lr_encoder: float = 3e-4
    lr_decoder: float = 1e-4
    lr_min: float = 1e-6
    mask_ratio: float = 0.5
    mask_patch: int = 8
    mask_method: MaskingMethod = MaskingMethod.RANDOM
    alpha: float = 1.0
    gamma: float = 2.0
    seed: int = 0
    encoder: dict = field(default_factory=dict)
    cls_width: int = 16
    repeat_factors: dict = field(default_factory=dict)
    flip: bool = True
    checkpoint_every: int = 0
    probe_points: int = 5
    probe_crop: int = 32
    probe_k: int = 5
    probe_repeats: int = 5
    holdout_fraction: float = 0.2

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.mask_method = MaskingMethod.parse(self.mask_method)
        self.validate()

    def validate(self) -> "TrainConfig":
        if self.iterations < 0:
            raise InvalidParameterError("iterations must be >= 0")
        for name in ("batch_size", "crop_size", "mask_patch", "cls_width", "probe_crop", "probe_k", "probe_repeats"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be positive")
        for name in ("lr_encoder", "lr_decoder", "lr_min", "alpha", "gamma"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not 0 <= self.mask_ratio <= 1:
            raise InvalidParameterError("mask_ratio must lie in [0, 1]")
        if not 0 <= self.holdout_fraction < 1:
            raise InvalidParameterError("holdout_fraction must lie in [0, 1)")
        if self.mode is Mode.PRETRAIN and self.crop_size % self.mask_patch:
            raise InvalidParameterError(
                f"crop_size {self.crop_size} must be divisible by mask_patch {self.mask_patch}"
            )
        self.encoder_config()
        return self

    def encoder_config(self, masked_mode: bool | None = None) -> EncoderConfig:
        d = dict(self.encoder)
        if masked_mode is not None:
            d["masked_mode"] = masked_mode
        return EncoderConfig(**d)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["mask_method"] = self.mask_method.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
