"""Submanifold (mask-aware) convolution."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidShapeError


def downsample_kept(kept: torch.Tensor, stride: int) -> torch.Tensor:
    """A coarse site stays KEPT only if every fine site it covers is kept."""
    if stride == 1:
        return kept
    return -F.max_pool2d(-kept, kernel_size=stride, stride=stride)


def masked_conv2d(
    x: torch.Tensor,
    kept: torch.Tensor | None,
    weight: torch.Tensor,
    bias: torch.Tensor | None = None,
    stride: int = 1,
    padding: int = 1,
) -> tuple[torch.Tensor, torch.Tensor | None]:
    """Convolution whose kept outputs see kept inputs only.

    ``kept`` is an ``(N, 1, H, W)`` 0/1 tensor.  Inputs at masked sites are
    zeroed before the convolution, outputs at masked sites are zeroed after
    it, and the (possibly downsampled) kept map is returned alongside.  With
    ``kept=None`` this is an ordinary convolution.
    """
    if kept is None:
        return F.conv2d(x, weight, bias, stride=stride, padding=padding), None
    if kept.shape[0] != x.shape[0] or kept.shape[-2:] != x.shape[-2:] or kept.shape[1] != 1:
        raise InvalidShapeError(f"kept map {tuple(kept.shape)} does not match input {tuple(x.shape)}")
    kept = kept.to(x.dtype)
    out = F.conv2d(x * kept, weight, bias, stride=stride, padding=padding)
    out_kept = downsample_kept(kept, stride)
    if out_kept.shape[-2:] != out.shape[-2:]:
        raise InvalidShapeError(
            f"stride {stride} does not evenly divide spatial size {tuple(x.shape[-2:])}"
        )
    return out * out_kept, out_kept


class MaskedConv2d(nn.Conv2d):
    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1, bias=True):
        super().__init__(
            in_channels, out_channels, kernel_size, stride=stride, padding=kernel_size // 2, bias=bias
        )

    def forward(self, x, kept=None):
        return masked_conv2d(x, kept, self.weight, self.bias, self.stride[0], self.padding[0])
