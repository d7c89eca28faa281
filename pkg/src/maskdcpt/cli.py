"""Command-line entry point: ``maskdcpt <subcommand> [options]``.

Global options (``--config``, ``--seed``, ``--out``) may appear before or
after the subcommand.  ``--config`` names a JSON training config whose keys
are listed in :mod:`maskdcpt.pipeline.config`; ``--seed`` overrides its
``seed``.  Exit status is 0 only when every requested step finished.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import MaskDCPTError

log = logging.getLogger("maskdcpt")

PAPER_SCALE = {"iterations": 100_000, "batch_size": 16, "crop_size": 256, "mask_patch": 16}


def _counts(text: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        if part.strip():
            k, _, v = part.partition("=")
            out[k.strip()] = int(v)
    if not out:
        raise argparse.ArgumentTypeError("expected FAMILY=COUNT[,FAMILY=COUNT...]")
    return out


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _strings(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load_config(args, **overrides):
    from .pipeline.config import TrainConfig

    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d.update(overrides)
    if args.seed is not None:
        d["seed"] = args.seed
    return TrainConfig.from_dict(d)


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_synth(args) -> int:
    from .degrade import build_corpus, write_procedural_dir

    out = _out(args, "corpus")
    clean = args.clean
    if clean is None:
        clean = out / "clean"
        write_procedural_dir(clean, args.procedural, size=args.size, seed=args.seed or 0)
    ranges = json.loads(Path(args.param_ranges).read_text()) if args.param_ranges else None
    m = build_corpus(clean, out, args.counts, ranges, seed=args.seed or 0, workers=args.workers)
    print(f"wrote {len(m.entries)} pairs to {out / 'manifest.json'}")
    return 0


def cmd_pretrain(args) -> int:
    from .pipeline import pretrain_run

    cfg = _load_config(args, mode="pretrain")
    res = pretrain_run(cfg, args.corpus, _out(args, "pretrain"), resume=args.resume)
    print(f"checkpoint {res.checkpoint_path}")
    print(f"encoder {res.encoder_path}")
    for it, acc in res.probe:
        print(f"probe iter {it}: {acc:.4f}")
    return 0


def cmd_finetune(args) -> int:
    from .pipeline import finetune_run

    cfg = _load_config(args, mode="finetune")
    res = finetune_run(cfg, args.corpus, args.init, _out(args, "finetune"))
    print(res.report.table(), end="")
    return 0


def cmd_probe(args) -> int:
    from .degrade import load_corpus
    from .model import encoder_from_checkpoint
    from .probe import mask_ratio_sweep, write_sweep

    enc = encoder_from_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    rows = mask_ratio_sweep(enc, corpus, args.mask_ratios, k=args.k, seed=args.seed or 0,
                            repeats=args.repeats, crop_size=args.crop, patch_size=args.patch)
    out = _out(args, "probe")
    path = write_sweep(rows, out / "probe.tsv", out / "probe.png" if args.chart else None)
    print(path.read_text(), end="")
    return 0


def cmd_eval(args) -> int:
    from .degrade import load_corpus
    from .model import Checkpoint, model_from_checkpoint
    from .report import emit_report, evaluate_restoration

    ck = Checkpoint.load(args.checkpoint)
    if ck.kind != "restoration":
        raise MaskDCPTError(f"eval needs a restoration checkpoint, got {ck.kind!r}")
    report = evaluate_restoration(model_from_checkpoint(ck), load_corpus(args.corpus), "", ck.digest()[:16])
    emit_report(report, _out(args, "eval") / "report")
    print(report.table(), end="")
    return 0


def cmd_ablate(args) -> int:
    from .ablation import run_ablation
    from .degrade import load_corpus
    from .pipeline.config import TrainConfig

    extra = PAPER_SCALE if args.paper_scale else {}
    base = _load_config(args, mode="pretrain", **extra)
    ft = None
    if args.finetune_config:
        d = json.loads(Path(args.finetune_config).read_text())
        d.update(extra)
        if args.seed is not None:
            d["seed"] = args.seed
        ft = TrainConfig.from_dict({**d, "mode": "finetune"})
    ft_corpus = load_corpus(args.finetune_corpus) if args.finetune_corpus else None
    table = run_ablation(args.axis, args.values, base, load_corpus(args.corpus), _out(args, "ablation"), ft, ft_corpus)
    print(table.to_tsv(), end="")
    return 0


def cmd_report(args) -> int:
    from .report import emit_report, load_report, plot_log

    out = _out(args, "report")
    for path in args.logs:
        p = Path(path)
        chart = plot_log(p, out / f"{p.stem}.png")
        print(f"chart {chart}")
    for path in args.reports:
        rep = load_report(path)
        emit_report(rep, out / Path(path).stem, formats=("txt",))
        print(rep.table(), end="")
    if not args.logs and not args.reports:
        raise MaskDCPTError("report needs --log and/or --report inputs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON training config")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed override")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="maskdcpt", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="build a synthetic degraded/clean corpus")
    s.add_argument("--clean", help="directory of clean images (default: procedural textures)")
    s.add_argument("--procedural", type=int, default=64, help="number of procedural textures when --clean is absent")
    s.add_argument("--size", type=int, default=64, help="procedural texture side")
    s.add_argument("--counts", type=_counts, required=True, help="e.g. H=40,RS=40,GN=40,MB=40,LL=40")
    s.add_argument("--param-ranges", help="JSON file of per-family parameter ranges")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pretrain", parents=[common], help="masked degradation-classification pre-training")
    s.add_argument("--corpus", required=True, help="corpus manifest.json")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.set_defaults(func=cmd_pretrain)

    s = sub.add_parser("finetune", parents=[common], help="restoration fine-tuning and held-out evaluation")
    s.add_argument("--corpus", required=True)
    s.add_argument("--init", help="encoder or pre-train checkpoint (default: random init)")
    s.set_defaults(func=cmd_finetune)

    s = sub.add_parser("probe", parents=[common], help="kNN degradation probe across mask ratios")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--mask-ratios", type=_floats, default=[0.0])
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--crop", type=int, default=32)
    s.add_argument("--patch", type=int, default=8)
    s.add_argument("--chart", action="store_true", help="also write probe.png")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("eval", parents=[common], help="PSNR/SSIM of a restoration checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", parents=[common], help="sweep mask ratio, patch size or masking method")
    s.add_argument("--axis", required=True, choices=["mask_ratio", "patch_size", "mask_method"])
    s.add_argument("--values", type=_strings, required=True, help="comma separated")
    s.add_argument("--corpus", required=True)
    s.add_argument("--finetune-config")
    s.add_argument("--finetune-corpus")
    s.add_argument("--paper-scale", action="store_true", help="full-size budgets: 100k iters, batch 16, 256px crops")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("report", parents=[common], help="charts from logs, text tables from JSON reports")
    s.add_argument("--log", dest="logs", action="append", default=[], help="tab-delimited log (repeatable)")
    s.add_argument("--report", dest="reports", action="append", default=[], help="report.json (repeatable)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "out", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "ablate":
        args.values = [v if args.axis == "mask_method" else float(v) for v in args.values]
    try:
        return args.func(args)
    except (MaskDCPTError, ValueError, OSError) as exc:
        print(f"maskdcpt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
