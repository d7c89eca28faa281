from .config import Mode, TrainConfig
from .sampler import RepeatSampler, effective_counts, make_repeat_sampler, parse_factors
from .train import (
    FinetuneResult,
    PretrainResult,
    build_pretrain_model,
    build_restoration_model,
    cosine_lr,
    finetune_run,
    make_batch,
    make_optimizer,
    pretrain_checkpoint,
    pretrain_run,
    pretrain_step,
    split_holdout,
)

__all__ = [
    "Mode", "TrainConfig", "RepeatSampler", "effective_counts", "make_repeat_sampler", "parse_factors",
    "FinetuneResult", "PretrainResult", "build_pretrain_model", "build_restoration_model", "cosine_lr",
    "finetune_run", "make_batch", "make_optimizer", "pretrain_checkpoint", "pretrain_run", "pretrain_step",
    "split_holdout",
]
