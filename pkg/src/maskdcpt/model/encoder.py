"""Desk-scale convolutional restoration backbone with latter-half feature taps."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidParameterError, InvalidShapeError
from .layers import MaskedConv2d


class Topology(str, enum.Enum):
    PLAIN = "plain"  # full resolution throughout
    UNET_LITE = "unet_lite"  # one 2x downsample at the first tapped block


def tap_indices(num_blocks: int) -> list[int]:
    """1-based indices of tapped blocks: ``floor(l/2) + 1 .. l``."""
    return list(range(num_blocks // 2 + 1, num_blocks + 1))


@dataclass
class EncoderConfig:
    num_blocks: int = 8
    channels: list[int] = field(default_factory=list)
    in_channels: int = 3
    topology: Topology = Topology.PLAIN
    masked_mode: bool = True

    def __post_init__(self):
        self.topology = Topology(self.topology)
        if self.num_blocks < 2:
            raise InvalidParameterError(f"num_blocks must be >= 2, got {self.num_blocks}")
        if not self.channels:
            half = self.num_blocks // 2
            self.channels = [32] * half + [64] * (self.num_blocks - half)
        self.channels = [int(c) for c in self.channels]
        if len(self.channels) != self.num_blocks:
            raise InvalidParameterError(
                f"{len(self.channels)} channel widths given for {self.num_blocks} blocks"
            )
        if min(self.channels) < 1 or self.in_channels < 1:
            raise InvalidParameterError("channel counts must be positive")

    @property
    def taps(self) -> list[int]:
        return tap_indices(self.num_blocks)

    @property
    def downsample(self) -> int:
        return 2 if self.topology is Topology.UNET_LITE else 1

    @property
    def tap_channels(self) -> list[int]:
        return [self.channels[i - 1] for i in self.taps]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["topology"] = self.topology.value
        return d

    @classmethod
    def from_dict(cls, d) -> "EncoderConfig":
        return cls(**d)


@dataclass
class FeaturePyramid:
    """Tapped features, shallow to deep, each with its aligned kept map."""

    indices: list[int]
    features: list[torch.Tensor]
    traces: list[torch.Tensor]

    def __len__(self):
        return len(self.features)

    @property
    def deepest(self) -> torch.Tensor:
        return self.features[-1]

    def entries(self):
        return list(zip(self.indices, self.features))


class Block(nn.Module):
    """conv3x3 -> GELU, with an identity skip when shapes allow."""

    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv = MaskedConv2d(cin, cout, 3, stride=stride)
        self.residual = cin == cout and stride == 1

    def forward(self, x, kept=None):
        h, kept = self.conv(x, kept)
        h = F.gelu(h)
        return (x + h if self.residual else h), kept


class Encoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.stem = MaskedConv2d(cfg.in_channels, cfg.channels[0], 3)
        down_at = cfg.num_blocks // 2 + 1 if cfg.topology is Topology.UNET_LITE else None
        blocks, cin = [], cfg.channels[0]
        for i, cout in enumerate(cfg.channels, start=1):
            blocks.append(Block(cin, cout, stride=2 if i == down_at else 1))
            cin = cout
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor, kept: torch.Tensor | None = None) -> FeaturePyramid:
        """Run the backbone; ``kept`` enables submanifold masking.

        ``kept`` is an ``(N, 1, H, W)`` pixel-level 0/1 map.  Without it the
        forward is an ordinary convolutional pass.
        """
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise InvalidShapeError(
                f"expected (N, {self.cfg.in_channels}, H, W) input, got {tuple(x.shape)}"
            )
        d = self.cfg.downsample
        if x.shape[-1] % d or x.shape[-2] % d:
            raise InvalidShapeError(f"spatial size {tuple(x.shape[-2:])} not divisible by {d}")
        taps = set(self.cfg.taps)
        h, k = self.stem(x, kept)
        idx, feats, traces = [], [], []
        for i, block in enumerate(self.blocks, start=1):
            h, k = block(h, k)
            if i in taps:
                idx.append(i)
                feats.append(h)
                traces.append(k if k is not None else torch.ones_like(h[:, :1]))
        return FeaturePyramid(idx, feats, traces)
