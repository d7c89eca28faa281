"""MaskDCPT pre-training, fine-tuning and the pieces they share.

Randomness is keyed statelessly: the crops, flips and masks of step ``t`` come
from ``derive_seed(cfg.seed, "step", t)`` and the sampler addresses batches by
position, so resuming from a checkpoint replays the uninterrupted run exactly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..degrade.corpus import Corpus, load_corpus
from ..degrade.ops import NUM_FAMILIES
from ..errors import CheckpointError, InvalidParameterError, NonFiniteLossError
from ..masking import generate_mask
from ..model.checkpoint import Checkpoint, import_encoder, load_state_strict
from ..model.decoders import MaskDCPTModel, RestorationModel
from ..objectives import LossBreakdown, pixel_l1_loss, total_loss
from ..probe import probe_accuracy
from ..report import EvalReport, emit_report, evaluate_restoration
from ..seeding import derive_seed
from .config import Mode, TrainConfig
from .sampler import RepeatSampler

log = logging.getLogger(__name__)

LOG_HEADER = ["iter", "pix", "cls", "total", "lr_enc", "lr_dec"]


def set_deterministic() -> None:
    torch.use_deterministic_algorithms(True)


def split_holdout(corpus, fraction: float = 0.2) -> tuple[list[int], list[int]]:
    """Stable per-family train/held-out split keyed on sample ids only.

    Each family with at least two samples holds out
    ``max(1, round(fraction * n))`` of them, chosen by hashed id.
    """
    ids, labels = corpus.ids, corpus.labels
    train, held = [], []
    for fam in np.unique(labels):
        idx = np.flatnonzero(labels == fam)
        order = sorted(idx, key=lambda i: derive_seed("holdout", ids[i]))
        n_held = 0 if fraction == 0 or idx.size < 2 else max(1, int(round(fraction * idx.size)))
        held += order[:n_held]
        train += order[n_held:]
    return sorted(int(i) for i in train), sorted(int(i) for i in held)


def _open_corpus(corpus) -> Corpus:
    if isinstance(corpus, (str, Path)):
        return load_corpus(corpus)
    return corpus


def make_batch(samples, crop: int, rng: np.random.Generator, flip: bool = True):
    """Random crops (and flips) stacked into ``(N, C, crop, crop)`` tensors."""
    lqs, gts = [], []
    for s in samples:
        h, w = s.gt.shape[:2]
        if crop > min(h, w):
            raise InvalidParameterError(f"crop {crop} exceeds sample {s.id} of size {h}x{w}")
        top = int(rng.integers(0, h - crop + 1))
        left = int(rng.integers(0, w - crop + 1))
        lq = s.lq[top : top + crop, left : left + crop]
        gt = s.gt[top : top + crop, left : left + crop]
        if flip and rng.random() < 0.5:
            lq, gt = lq[:, ::-1], gt[:, ::-1]
        lqs.append(lq)
        gts.append(gt)

    def to_t(xs):
        return torch.from_numpy(np.ascontiguousarray(np.stack(xs), dtype=np.float32)).permute(0, 3, 1, 2).contiguous()

    labels = torch.tensor([s.label for s in samples], dtype=torch.long)
    return to_t(lqs), to_t(gts), labels


def batch_masks(n: int, cfg: TrainConfig, step_seed: int) -> torch.Tensor:
    kept = [
        generate_mask(cfg.crop_size, cfg.crop_size, cfg.mask_patch, cfg.mask_ratio, cfg.mask_method,
                      derive_seed(step_seed, "mask", j)).pixel_kept()
        for j in range(n)
    ]
    return torch.from_numpy(np.stack(kept)[:, None].astype(np.float32))


def make_optimizer(model: MaskDCPTModel, cfg: TrainConfig) -> torch.optim.AdamW:
    """AdamW, zero weight decay, separate encoder and decoder learning rates."""
    return torch.optim.AdamW(
        [
            {"params": model.encoder_parameters(), "lr": cfg.lr_encoder, "name": "encoder"},
            {"params": model.decoder_parameters(), "lr": cfg.lr_decoder, "name": "decoder"},
        ],
        weight_decay=0.0,
        foreach=False,
    )


def pretrain_step(model, optimizer, samples, cfg: TrainConfig, step_seed: int, iteration: int = 0) -> LossBreakdown:
    """One masked pre-training update on ``samples``; returns the batch-mean losses."""
    rng = np.random.default_rng(step_seed)
    lq, gt, labels = make_batch(samples, cfg.crop_size, rng, cfg.flip)
    kept = batch_masks(len(samples), cfg, step_seed)
    logits, recon, _ = model(lq * kept, kept)
    terms = total_loss(recon, gt, logits, labels, cfg.alpha, cfg.gamma)
    if not torch.isfinite(terms.total):
        raise NonFiniteLossError(iteration, step_seed, [s.id for s in samples], terms.breakdown())
    optimizer.zero_grad(set_to_none=True)
    terms.total.backward()
    optimizer.step()
    return terms.breakdown()


def optimizer_tensors(model, optimizer) -> dict[str, torch.Tensor]:
    names = {id(p): n for n, p in model.named_parameters()}
    out = {}
    for group in optimizer.param_groups:
        for p in group["params"]:
            st = optimizer.state.get(p)
            if not st:
                continue
            for key in ("step", "exp_avg", "exp_avg_sq"):
                out[f"optim.{names[id(p)]}.{key}"] = st[key]
    return out


def restore_optimizer(model, optimizer, tensors) -> None:
    for n, p in model.named_parameters():
        if f"optim.{n}.step" in tensors:
            optimizer.state[p] = {
                key: torch.from_numpy(np.array(tensors[f"optim.{n}.{key}"]))
                for key in ("step", "exp_avg", "exp_avg_sq")
            }


class _LossLog:
    def __init__(self, path: Path, digest: str = "", append: bool = False):
        self.path = path
        self.rows: list[list[str]] = []
        self.digest = digest
        if not append or not path.exists():
            path.write_text("\t".join(LOG_HEADER) + "\n")

    def add(self, it, b: LossBreakdown, lr_enc, lr_dec):
        row = [str(it)] + [f"{v:.9g}" for v in (b.pix, b.cls, b.total, lr_enc, lr_dec)]
        self.rows.append(row)
        line = "\t".join(row)
        # Hash chain, so a resumed run continues the same digest.
        self.digest = hashlib.sha256((self.digest + line).encode()).hexdigest()
        with self.path.open("a") as fh:
            fh.write(line + "\n")


def _config_digest(cfg: TrainConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def build_pretrain_model(cfg: TrainConfig, num_classes: int = NUM_FAMILIES) -> MaskDCPTModel:
    torch.manual_seed(derive_seed(cfg.seed, "init") % (2**63))
    return MaskDCPTModel(cfg.encoder_config(masked_mode=True), num_classes, cfg.cls_width)


def pretrain_checkpoint(model, optimizer, cfg: TrainConfig, iteration: int, loss_digest: str) -> Checkpoint:
    tensors = dict(model.state_dict())
    tensors.update(optimizer_tensors(model, optimizer))
    meta = {
        "iteration": iteration,
        "seed": cfg.seed,
        "loss_digest": loss_digest,
        "num_classes": model.cls_decoder.fc.out_features,
        "cls_width": cfg.cls_width,
        "config": cfg.to_dict(),
    }
    return Checkpoint("pretrain", model.cfg.to_dict(), tensors, meta)


@dataclass
class PretrainResult:
    checkpoint: Checkpoint
    checkpoint_path: Path
    encoder_path: Path
    model: MaskDCPTModel
    losses: list[LossBreakdown] = field(default_factory=list)
    probe: list[tuple[int, float]] = field(default_factory=list)
    lrs: list[tuple[float, float]] = field(default_factory=list)


def probe_schedule(iterations: int, points: int) -> list[int]:
    if points <= 0:
        return []
    if points == 1:
        return [iterations]
    return sorted({int(round(iterations * k / (points - 1))) for k in range(points)})


def pretrain_run(cfg: TrainConfig, corpus, out_dir, resume=None, probe_samples=None) -> PretrainResult:
    """Masked degradation-classification pre-training at constant learning rates.

    Writes ``train_log.tsv``, ``probe_log.tsv`` (kNN accuracy at evenly spaced
    iterations), optional ``ckpt_<iter>.ckpt`` snapshots, ``final.ckpt`` and
    the encoder-only ``encoder.ckpt`` under ``out_dir``.
    """
    if cfg.mode is not Mode.PRETRAIN:
        cfg = cfg.with_(mode=Mode.PRETRAIN)
    set_deterministic()
    corpus = _open_corpus(corpus)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_idx, _ = split_holdout(corpus, cfg.holdout_fraction)
    train_set = corpus.subset(train_idx)
    sampler = RepeatSampler(train_set.labels, cfg.repeat_factors, derive_seed(cfg.seed, "sampler"))

    model = build_pretrain_model(cfg)
    model.train()
    optimizer = make_optimizer(model, cfg)
    start, digest = 0, ""
    if resume is not None:
        ck = resume if isinstance(resume, Checkpoint) else Checkpoint.load(resume)
        if ck.kind != "pretrain":
            raise CheckpointError(f"cannot resume pre-training from a {ck.kind!r} checkpoint")
        load_state_strict(model, {k: v for k, v in ck.tensors.items() if not k.startswith("optim.")})
        restore_optimizer(model, optimizer, ck.tensors)
        start, digest = int(ck.meta["iteration"]), ck.meta.get("loss_digest", "")

    loss_log = _LossLog(out / "train_log.tsv", digest)
    probe_path = out / "probe_log.tsv"
    if resume is None or not probe_path.exists():
        probe_path.write_text("iter\taccuracy\n")
    probe_at = [p for p in probe_schedule(cfg.iterations, cfg.probe_points) if p >= start]
    probe_set = probe_samples if probe_samples is not None else train_set
    can_probe = np.unique(probe_set.labels).size >= 2
    result = PretrainResult(None, None, None, model)

    def run_probe(it):
        if not can_probe or it not in probe_at:
            return
        acc = probe_accuracy(model, probe_set, 0.0, cfg.probe_k, derive_seed(cfg.seed, "probe"),
                             cfg.probe_repeats, cfg.probe_crop, cfg.mask_patch)
        result.probe.append((it, acc))
        with probe_path.open("a") as fh:
            fh.write(f"{it}\t{acc:.6f}\n")
        log.info("iter %d probe accuracy %.4f", it, acc)

    run_probe(start)
    for it in range(start + 1, cfg.iterations + 1):
        idx = sampler.batch(it - 1, cfg.batch_size)
        samples = [train_set[i] for i in idx]
        step_seed = derive_seed(cfg.seed, "step", it)
        b = pretrain_step(model, optimizer, samples, cfg, step_seed, it)
        lrs = (optimizer.param_groups[0]["lr"], optimizer.param_groups[1]["lr"])
        loss_log.add(it, b, *lrs)
        result.losses.append(b)
        result.lrs.append(lrs)
        if cfg.checkpoint_every and it % cfg.checkpoint_every == 0 and it != cfg.iterations:
            pretrain_checkpoint(model, optimizer, cfg, it, loss_log.digest).save(out / f"ckpt_{it:06d}.ckpt")
        run_probe(it)

    final_it = max(cfg.iterations, start)
    ck = pretrain_checkpoint(model, optimizer, cfg, final_it, loss_log.digest)
    result.checkpoint = ck
    result.checkpoint_path = ck.save(out / "final.ckpt")
    enc_tensors = {f"encoder.{k}": v for k, v in model.encoder.state_dict().items()}
    result.encoder_path = Checkpoint("encoder", model.cfg.to_dict(), enc_tensors, {"iteration": final_it}).save(
        out / "encoder.ckpt"
    )
    return result


def cosine_lr(t: int, total: int, lr_max: float, lr_min: float) -> float:
    """Cosine annealing over steps ``0 .. total-1``: ``lr_max`` at 0, ``lr_min`` at the end."""
    if total <= 1:
        return lr_max
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t / (total - 1)))


def build_restoration_model(cfg: TrainConfig) -> RestorationModel:
    torch.manual_seed(derive_seed(cfg.seed, "init") % (2**63))
    return RestorationModel(cfg.encoder_config(masked_mode=False))


@dataclass
class FinetuneResult:
    model: RestorationModel
    report: EvalReport
    checkpoint_path: Path
    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)


def finetune_run(cfg: TrainConfig, corpus, init=None, out_dir=None) -> FinetuneResult:
    """Supervised all-in-one restoration from a pre-trained encoder (or scratch).

    ``init`` is a checkpoint path holding encoder weights, or ``None`` for a
    random initialization.  Training is unmasked L1 with a cosine schedule from
    ``cfg.lr_encoder`` to ``cfg.lr_min``; the held-out split is evaluated at the
    end and written to ``report.json`` / ``report.txt``.
    """
    if cfg.mode is not Mode.FINETUNE:
        cfg = cfg.with_(mode=Mode.FINETUNE)
    set_deterministic()
    corpus = _open_corpus(corpus)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    train_idx, held_idx = split_holdout(corpus, cfg.holdout_fraction)
    train_set, held_set = corpus.subset(train_idx), corpus.subset(held_idx)
    sampler = RepeatSampler(train_set.labels, cfg.repeat_factors, derive_seed(cfg.seed, "sampler"))

    model = build_restoration_model(cfg)
    ck_digest = "random"
    if init is not None:
        import_encoder(init, model)
        ck_digest = Checkpoint.load(init).digest()[:16]
    model.train()
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr_encoder, weight_decay=0.0, foreach=False)
    loss_log = _LossLog(out / "train_log.tsv") if out is not None else None
    result = FinetuneResult(model, None, None)
    for t in range(cfg.iterations):
        lr = cosine_lr(t, cfg.iterations, cfg.lr_encoder, cfg.lr_min)
        for g in opt.param_groups:
            g["lr"] = lr
        idx = sampler.batch(t, cfg.batch_size)
        samples = [train_set[i] for i in idx]
        step_seed = derive_seed(cfg.seed, "ft-step", t + 1)
        lq, gt, _ = make_batch(samples, cfg.crop_size, np.random.default_rng(step_seed), cfg.flip)
        loss = pixel_l1_loss(model(lq), gt)
        if not torch.isfinite(loss):
            raise NonFiniteLossError(t + 1, step_seed, [s.id for s in samples], float(loss))
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        result.losses.append(float(loss.detach()))
        result.lrs.append(lr)
        if loss_log is not None:
            v = result.losses[-1]
            loss_log.add(t + 1, LossBreakdown(v, 0.0, v, 1.0), lr, lr)

    model.eval()
    result.report = evaluate_restoration(model, held_set, _config_digest(cfg), ck_digest)
    if out is not None:
        emit_report(result.report, out / "report")
        tensors = dict(model.state_dict())
        ck = Checkpoint("restoration", model.cfg.to_dict(), tensors,
                        {"iteration": cfg.iterations, "seed": cfg.seed, "config": cfg.to_dict()})
        result.checkpoint_path = ck.save(out / "restoration.ckpt")
    return result
