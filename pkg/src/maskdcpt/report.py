"""Evaluation reports: per-family PSNR/SSIM, JSON and aligned-text emitters, charts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch

from .degrade.ops import Family
from .metrics import psnr, ssim

def _enc(v):
    if isinstance(v, float) and math.isinf(v):
        return {"__float__": "inf" if v > 0 else "-inf"}
    return v


def _dec(v):
    if isinstance(v, dict) and set(v) == {"__float__"}:
        return float(v["__float__"])
    return v


@dataclass
class FamilyScore:
    psnr: float
    ssim: float
    count: int


@dataclass
class EvalReport:
    families: dict[str, FamilyScore] = field(default_factory=dict)
    config_digest: str = ""
    checkpoint_digest: str = ""
    timestamp: str = ""

    @property
    def mean_psnr(self) -> float:
        vals = [s.psnr for s in self.families.values()]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def mean_ssim(self) -> float:
        vals = [s.ssim for s in self.families.values()]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self) -> dict:
        return {
            "families": {
                k: {"psnr": _enc(s.psnr), "ssim": _enc(s.ssim), "count": s.count} for k, s in self.families.items()
            },
            "config_digest": self.config_digest,
            "checkpoint_digest": self.checkpoint_digest,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        fams = {
            k: FamilyScore(_dec(v["psnr"]), _dec(v["ssim"]), int(v["count"])) for k, v in d.get("families", {}).items()
        }
        return cls(fams, d.get("config_digest", ""), d.get("checkpoint_digest", ""), d.get("timestamp", ""))

    def table(self) -> str:
        rows = [("family", "count", "PSNR", "SSIM")]
        for k, s in self.families.items():
            rows.append((k, str(s.count), f"{s.psnr:.4f}", f"{s.ssim:.4f}"))
        if self.families:
            rows.append(("mean", str(sum(s.count for s in self.families.values())),
                         f"{self.mean_psnr:.4f}", f"{self.mean_ssim:.4f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


@torch.no_grad()
def evaluate_restoration(model, samples, config_digest="", checkpoint_digest="", timestamp=None) -> EvalReport:
    """Per-image PSNR/SSIM of ``model(lq)`` against ``gt``, averaged per family."""
    was = model.training
    model.eval()
    per: dict[int, list[tuple[float, float]]] = {}
    for i in range(len(samples)):
        s = samples[i]
        x = torch.from_numpy(np.ascontiguousarray(s.lq, dtype=np.float32)).permute(2, 0, 1)[None]
        out = model(x)[0].permute(1, 2, 0).clamp(0, 1).double().numpy()
        gt = np.asarray(s.gt, dtype=np.float64)
        per.setdefault(s.label, []).append((psnr(out, gt), ssim(out, gt)))
    model.train(was)
    fams = {}
    for lab in sorted(per):
        vals = np.array(per[lab])
        fams[Family(lab).name] = FamilyScore(float(vals[:, 0].mean()), float(vals[:, 1].mean()), len(vals))
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return EvalReport(fams, config_digest, checkpoint_digest, timestamp)


def emit_report(report: EvalReport, out_stem, formats=("json", "txt")) -> list[Path]:
    """Write ``<stem>.json`` and/or ``<stem>.txt``; returns the written paths."""
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            p = stem.with_suffix(".json")
            p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        elif fmt == "txt":
            p = stem.with_suffix(".txt")
            p.write_text(report.table())
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(p)
    return written


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


def read_log(path) -> dict[str, np.ndarray]:
    """Read a tab-delimited log with a header row into named columns."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def plot_log(log_path, out_path, x: str = "iter", ys=None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = read_log(log_path)
    ys = ys or [c for c in cols if c != x and not c.startswith("lr")]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for c in ys:
        ax.plot(cols[x], cols[c], label=c)
    ax.set_xlabel(x)
    ax.legend()
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return out
