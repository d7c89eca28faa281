"""Degradation-classification and reconstruction decoders, plus the fine-tune model."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..degrade.ops import NUM_FAMILIES
from ..errors import InvalidShapeError
from .encoder import Encoder, EncoderConfig, FeaturePyramid


def layer_norm2d(channels: int) -> nn.GroupNorm:
    # One group: statistics over (C, H, W) of each sample.
    return nn.GroupNorm(1, channels)


class BasicBlock(nn.Module):
    """ResNet basic block with per-sample normalization."""

    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.norm1 = layer_norm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.norm2 = layer_norm2d(cout)
        self.shortcut = None
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False), layer_norm2d(cout))

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        s = x if self.shortcut is None else self.shortcut(x)
        return F.relu(h + s)


class ClsDecoder(nn.Module):
    """ResNet18-shaped classifier fed by scaled encoder taps.

    Tap ``k`` (shallowest first) is scaled by a learnable ``omega[k]``,
    projected by a 1x1 conv, pooled to the running resolution and added to
    the input of stage ``k``.  Each stage holds two basic blocks; stage widths
    follow ResNet18 at ``base_width / 64`` of its size.
    """

    def __init__(self, tap_channels, num_classes=NUM_FAMILIES, base_width=16, blocks_per_stage=2):
        super().__init__()
        n = len(tap_channels)
        self.num_stages = n
        widths = [base_width * 2 ** min(k, 3) for k in range(n)]
        in_widths = [widths[0]] + widths[:-1]
        self.omega = nn.Parameter(torch.ones(n))
        self.proj = nn.ModuleList(nn.Conv2d(c, w, 1) for c, w in zip(tap_channels, in_widths))
        stages = []
        for k in range(n):
            layers = [BasicBlock(in_widths[k], widths[k], stride=1 if k == 0 else 2)]
            layers += [BasicBlock(widths[k], widths[k]) for _ in range(blocks_per_stage - 1)]
            stages.append(nn.Sequential(*layers))
        self.stages = nn.ModuleList(stages)
        self.fc = nn.Linear(widths[-1], num_classes)

    def forward(self, pyr: FeaturePyramid) -> torch.Tensor:
        if len(pyr) != self.num_stages:
            raise InvalidShapeError(f"{len(pyr)} taps for {self.num_stages} decoder stages")
        h = None
        for k, feat in enumerate(pyr.features):
            scaled = self.omega[k] * feat
            if h is not None and scaled.shape[-2:] != h.shape[-2:]:
                scaled = F.adaptive_avg_pool2d(scaled, h.shape[-2:])
            inj = self.proj[k](scaled)
            h = inj if h is None else h + inj
            h = self.stages[k](h)
        return self.fc(torch.flatten(F.adaptive_avg_pool2d(h, 1), 1))


class ReconDecoder(nn.Module):
    """conv -> GELU -> [conv + pixel shuffle] x log2(scale) -> conv."""

    def __init__(self, in_channels, out_channels=3, hidden=None, scale=1):
        super().__init__()
        hidden = hidden or in_channels
        layers = [nn.Conv2d(in_channels, hidden, 3, 1, 1), nn.GELU()]
        s = scale
        while s > 1:
            layers += [nn.Conv2d(hidden, hidden * 4, 3, 1, 1), nn.PixelShuffle(2), nn.GELU()]
            s //= 2
        layers.append(nn.Conv2d(hidden, out_channels, 3, 1, 1))
        self.body = nn.Sequential(*layers)
        self.in_channels = in_channels

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        if feat.ndim != 4 or feat.shape[1] != self.in_channels:
            raise InvalidShapeError(f"expected {self.in_channels}-channel feature, got {tuple(feat.shape)}")
        return self.body(feat)


class MaskDCPTModel(nn.Module):
    """Masked encoder with the classification and reconstruction decoders."""

    def __init__(self, cfg: EncoderConfig, num_classes=NUM_FAMILIES, cls_width=16):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.cls_decoder = ClsDecoder(cfg.tap_channels, num_classes, cls_width)
        self.recon_decoder = ReconDecoder(cfg.channels[-1], cfg.in_channels, scale=cfg.downsample)

    def forward(self, x, kept=None):
        pyr = self.encoder(x, kept if self.cfg.masked_mode else None)
        return self.cls_decoder(pyr), self.recon_decoder(pyr.deepest), pyr

    def encoder_parameters(self):
        return list(self.encoder.parameters())

    def decoder_parameters(self):
        return list(self.cls_decoder.parameters()) + list(self.recon_decoder.parameters())


class RestorationHead(nn.Module):
    def __init__(self, in_channels, out_channels=3, scale=1, init_std=1e-3):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels * scale * scale, 3, 1, 1)
        self.shuffle = nn.PixelShuffle(scale) if scale > 1 else nn.Identity()
        nn.init.normal_(self.conv.weight, 0.0, init_std)
        nn.init.zeros_(self.conv.bias)

    def forward(self, feat):
        return self.shuffle(self.conv(feat))


class RestorationModel(nn.Module):
    """Encoder plus a fresh head predicting a residual on top of the input."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.head = RestorationHead(cfg.channels[-1], cfg.in_channels, cfg.downsample)

    def forward(self, x):
        return x + self.head(self.encoder(x).deepest)
