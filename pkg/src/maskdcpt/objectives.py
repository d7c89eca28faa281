"""Focal classification loss, L1 pixel loss and their weighted sum."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import InvalidInputError, InvalidParameterError, InvalidShapeError


def focal_loss(
    logits: torch.Tensor,
    target,
    gamma: float = 2.0,
    class_weights: torch.Tensor | None = None,
    reduction: str = "mean",
) -> torch.Tensor:
    """Multi-class focal loss ``-w_t (1 - p_t)^gamma log p_t``.

    ``logits`` is ``(K,)`` or ``(N, K)``; ``target`` holds class indices.
    ``log p_t`` comes from ``log_softmax`` and ``1 - p_t`` from ``expm1`` so
    confident predictions stay accurate.  ``gamma=0`` gives (weighted)
    cross-entropy.
    """
    if gamma < 0:
        raise InvalidParameterError(f"gamma must be >= 0, got {gamma}")
    if not torch.isfinite(logits).all():
        raise InvalidInputError("logits contain non-finite values")
    squeeze = logits.ndim == 1
    if squeeze:
        logits = logits.unsqueeze(0)
    target = torch.as_tensor(target, dtype=torch.long, device=logits.device).reshape(-1)
    k = logits.shape[1]
    if target.shape[0] != logits.shape[0] or bool((target < 0).any()) or bool((target >= k).any()):
        raise InvalidInputError(f"targets {target.tolist()} invalid for {k} classes")
    logp_t = F.log_softmax(logits, dim=1).gather(1, target[:, None]).squeeze(1)
    one_minus_p = -torch.expm1(logp_t)
    loss = -logp_t if gamma == 0 else -(one_minus_p**gamma) * logp_t
    if class_weights is not None:
        loss = loss * torch.as_tensor(class_weights, dtype=logits.dtype)[target]
    if reduction == "none":
        return loss[0] if squeeze else loss
    if reduction == "sum":
        return loss.sum()
    return loss.mean()


def pixel_l1_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over every element, masked and unmasked alike."""
    if pred.shape != gt.shape:
        raise InvalidShapeError(f"shape mismatch {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).abs().mean()


@dataclass
class LossBreakdown:
    pix: float
    cls: float
    total: float
    alpha: float

    def as_row(self) -> list[float]:
        return [self.pix, self.cls, self.total]


@dataclass
class LossTerms:
    """Differentiable loss terms; ``total`` is what gets back-propagated."""

    pix: torch.Tensor
    cls: torch.Tensor
    total: torch.Tensor
    alpha: float

    def breakdown(self) -> LossBreakdown:
        return LossBreakdown(
            float(self.pix.detach()), float(self.cls.detach()), float(self.total.detach()), self.alpha
        )


def total_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    logits: torch.Tensor,
    target,
    alpha: float = 1.0,
    gamma: float = 2.0,
    class_weights=None,
) -> LossTerms:
    """``alpha * L1(pred, gt) + focal(logits, target)``, focal averaged over the batch."""
    pix = pixel_l1_loss(pred, gt)
    cls = focal_loss(logits, target, gamma, class_weights)
    return LossTerms(pix, cls, alpha * pix + cls, alpha)
