"""Ablation driver: sweep one masking knob through pre-train, fine-tune, evaluate.

Each arm lives in its own directory under ``out_dir``.  If any arm directory
there already holds an ``arm.json`` with the same configurations and corpora,
that result is reused rather than retrained, so a crashed sweep resumes where
it stopped and rerunning a finished sweep only rebuilds the table.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .degrade.ops import Family
from .errors import InvalidParameterError
from .masking import MaskingMethod
from .pipeline.config import Mode, TrainConfig
from .pipeline.train import finetune_run, pretrain_run
from .report import EvalReport

log = logging.getLogger(__name__)


class AblationAxis(str, enum.Enum):
    MASK_RATIO = "mask_ratio"
    PATCH_SIZE = "patch_size"
    MASK_METHOD = "mask_method"

    @classmethod
    def parse(cls, v) -> "AblationAxis":
        if isinstance(v, cls):
            return v
        key = str(v).strip().lower().replace("-", "_")
        aliases = {"ratio": "mask_ratio", "patch": "patch_size", "mask_patch": "patch_size", "method": "mask_method"}
        return cls(aliases.get(key, key))


_FIELD = {
    AblationAxis.MASK_RATIO: "mask_ratio",
    AblationAxis.PATCH_SIZE: "mask_patch",
    AblationAxis.MASK_METHOD: "mask_method",
}
_METHOD_ORDER = [MaskingMethod.SQUARE, MaskingMethod.BLOCK_WISE, MaskingMethod.RANDOM]


def _normalize(axis: AblationAxis, values, crop: int) -> list:
    if axis is AblationAxis.MASK_RATIO:
        vals = sorted({float(v) for v in values})
        if any(not 0 <= v <= 1 for v in vals):
            raise InvalidParameterError(f"mask ratios must lie in [0, 1], got {vals}")
    elif axis is AblationAxis.PATCH_SIZE:
        vals = sorted({int(v) for v in values})
        bad = [v for v in vals if v < 1 or crop % v]
        if bad:
            raise InvalidParameterError(f"patch sizes {bad} do not tile the {crop}px crop")
    else:
        chosen = {MaskingMethod.parse(v) for v in values}
        vals = [m for m in _METHOD_ORDER if m in chosen]
    if not vals:
        raise InvalidParameterError("ablation needs at least one value")
    return vals


def _label(v) -> str:
    return v.value if isinstance(v, MaskingMethod) else f"{v:g}"


@dataclass
class AblationRow:
    value: object
    report: EvalReport
    probe: float | None = None

    def cells(self) -> list[str]:
        fams = [f"{self.report.families[f.name].psnr:.4f}" if f.name in self.report.families else "-" for f in Family]
        probe = "-" if self.probe is None else f"{self.probe:.4f}"
        return [_label(self.value), *fams, f"{self.report.mean_psnr:.4f}", f"{self.report.mean_ssim:.4f}", probe]


@dataclass
class AblationTable:
    axis: AblationAxis
    rows: list[AblationRow]

    def header(self) -> list[str]:
        return [self.axis.value, *(f"psnr_{f.abbrev}" for f in Family), "psnr_mean", "ssim_mean", "probe_acc"]

    def to_tsv(self) -> str:
        return "".join("\t".join(r) + "\n" for r in [self.header()] + [row.cells() for row in self.rows])

    def psnr(self, value) -> float:
        for row in self.rows:
            if row.value == value:
                return row.report.mean_psnr
        raise KeyError(value)


def _digest(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _run_arm(arm_dir: Path, pre_cfg: TrainConfig, ft_cfg: TrainConfig, corpus, ft_corpus) -> AblationRow:
    key = _digest({
        "pretrain": pre_cfg.to_dict(),
        "finetune": ft_cfg.to_dict(),
        "corpus": list(corpus.ids),
        "finetune_corpus": list(ft_corpus.ids),
    })
    marker = arm_dir / "arm.json"
    # Any finished arm with the same configs counts, e.g. ratio 0.5 in a patch sweep.
    for done in sorted(arm_dir.parent.glob("*/arm.json")):
        saved = json.loads(done.read_text())
        if saved.get("key") == key:
            log.info("reusing finished arm %s", done.parent.name)
            return AblationRow(None, EvalReport.from_dict(saved["report"]), saved.get("probe"))
    pre = pretrain_run(pre_cfg, corpus, arm_dir / "pretrain")
    ft = finetune_run(ft_cfg, ft_corpus, pre.encoder_path, arm_dir / "finetune")
    probe = pre.probe[-1][1] if pre.probe else None
    marker.write_text(json.dumps({"key": key, "report": ft.report.to_dict(), "probe": probe}, indent=2, sort_keys=True))
    return AblationRow(None, ft.report, probe)


def run_ablation(
    axis,
    values,
    base_config: TrainConfig,
    corpus,
    out_dir,
    finetune_config: TrainConfig | None = None,
    finetune_corpus=None,
) -> AblationTable:
    """Pre-train, fine-tune and evaluate one arm per value; write ``ablation.tsv``.

    ``base_config`` drives pre-training; only the swept field changes between
    arms.  Fine-tuning uses ``finetune_config`` (default: ``base_config`` in
    fine-tune mode) on ``finetune_corpus`` (default: ``corpus``) and never
    depends on the swept value, so arms differ only through the pre-trained
    encoder.  Rows follow the swept value's natural order.  If an arm fails,
    the rows finished so far are still written before the error propagates.
    """
    axis = AblationAxis.parse(axis)
    base = base_config.with_(mode=Mode.PRETRAIN)
    vals = _normalize(axis, values, base.crop_size)
    ft_cfg = (finetune_config or base_config).with_(mode=Mode.FINETUNE)
    ft_corpus = corpus if finetune_corpus is None else finetune_corpus
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = AblationTable(axis, [])
    try:
        for v in vals:
            arm_cfg = base.with_(**{_FIELD[axis]: v})
            arm_cfg.validate()
            row = _run_arm(out / f"{axis.value}_{_label(v)}", arm_cfg, ft_cfg, corpus, ft_corpus)
            row.value = v
            table.rows.append(row)
            log.info("arm %s=%s mean PSNR %.4f", axis.value, _label(v), row.report.mean_psnr)
    finally:
        (out / "ablation.tsv").write_text(table.to_tsv())
    return table
