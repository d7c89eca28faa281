import json
import math
from collections import Counter

import numpy as np
import pytest
import torch

from maskdcpt.degrade import Family
from maskdcpt.errors import InvalidParameterError, NonFiniteLossError
from maskdcpt.model import Checkpoint, RestorationModel, import_encoder, model_from_checkpoint, state_digest
from maskdcpt.pipeline import (
    RepeatSampler,
    TrainConfig,
    build_pretrain_model,
    cosine_lr,
    effective_counts,
    finetune_run,
    make_optimizer,
    parse_factors,
    pretrain_run,
    pretrain_step,
    split_holdout,
)
from maskdcpt.report import evaluate_restoration

TINY = dict(
    batch_size=4,
    crop_size=16,
    mask_patch=4,
    encoder={"num_blocks": 2, "channels": [4, 4]},
    cls_width=4,
    probe_points=0,
)


def tiny(**kw):
    return TrainConfig(**{**TINY, **kw})


class TestSampler:
    def test_reference_ratios(self):
        counts = {"H": 72135, "RS": 200, "GN": 5144, "MB": 2103, "LL": 485}
        eff = effective_counts(counts, "[1H, 300RS, 15GN, 5MB, 60LL]")
        assert eff == {
            Family.HAZE: 72135,
            Family.RAIN_STREAK: 60000,
            Family.GAUSSIAN_NOISE: 77160,
            Family.MOTION_BLUR: 10515,
            Family.LOW_LIGHT: 29100,
        }

    def test_parse_forms_agree(self):
        assert parse_factors("[1H, 300RS, 15GN, 5MB, 60LL]") == parse_factors(
            {"H": 1, "RS": 300, "GN": 15, "MB": 5, "LL": 60}
        )

    def test_toy_epoch(self):
        s = RepeatSampler([0, 0, 0, 1], {"H": 1, "RS": 3}, seed=4)
        ep = s.epoch(0)
        assert len(ep) == 6
        assert Counter(ep.tolist()) == {0: 1, 1: 1, 2: 1, 3: 3}

    def test_all_ones_is_permutation(self):
        s = RepeatSampler([0, 1, 2, 3, 4, 0], seed=1)
        assert sorted(s.epoch(0).tolist()) == list(range(6))
        assert not np.array_equal(s.epoch(0), s.epoch(1)) or not np.array_equal(s.epoch(1), s.epoch(2))

    @pytest.mark.parametrize("e", [0, 1, 5])
    def test_exact_histograms(self, e):
        labels = [0] * 7 + [1] * 2 + [2] * 3 + [4]
        s = RepeatSampler(labels, {"RS": 4, "GN": 2, "LL": 9}, seed=e)
        assert s.histogram(e) == {Family(0): 7, Family(1): 8, Family(2): 6, Family(4): 9}
        assert Counter(s.epoch(e).tolist()) == Counter(
            {i: {0: 1, 1: 4, 2: 2, 4: 9}[l] for i, l in enumerate(labels)}
        )

    def test_absent_family_warns(self):
        with pytest.warns(UserWarning):
            s = RepeatSampler([0, 0], {"LL": 5})
        assert len(s) == 2

    def test_bad_factor(self):
        with pytest.raises(InvalidParameterError):
            RepeatSampler([0, 1], {"RS": 0})

    def test_positions_cross_epochs(self):
        s = RepeatSampler([0, 1, 2], seed=2)
        assert s.positions(0, 6) == s.epoch(0).tolist() + s.epoch(1).tolist()
        assert s.batch(1, 2) == s.positions(2, 2)


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = tiny(repeat_factors={"RS": 3}, mask_method="block_wise")
        cfg.save(tmp_path / "c.json")
        assert TrainConfig.from_file(tmp_path / "c.json") == cfg

    def test_unknown_key(self):
        with pytest.raises(InvalidParameterError):
            TrainConfig.from_dict({"iterations": 1, "warmup": 5})

    def test_crop_patch_divisibility(self):
        with pytest.raises(InvalidParameterError):
            TrainConfig(crop_size=30, mask_patch=8)
        TrainConfig(mode="finetune", crop_size=30, mask_patch=8)

    def test_invalid_values(self):
        for bad in ({"batch_size": 0}, {"mask_ratio": 1.5}, {"lr_encoder": -1}, {"iterations": -1}):
            with pytest.raises(InvalidParameterError):
                TrainConfig(**bad)


def test_holdout_is_stratified_and_stable(small_corpus):
    train, held = split_holdout(small_corpus, 0.2)
    assert sorted(train + held) == list(range(len(small_corpus)))
    labels = small_corpus.labels
    assert Counter(labels[held].tolist()) == {f: 1 for f in range(5)}
    assert split_holdout(small_corpus, 0.2) == (train, held)


def params_of(mod):
    return [p.detach().clone() for p in mod.parameters()]


class TestStep:
    def test_split_lr_decoder_frozen(self, small_corpus):
        cfg = tiny(lr_decoder=0.0)
        model = build_pretrain_model(cfg)
        opt = make_optimizer(model, cfg)
        dec0, enc0 = params_of(model.cls_decoder) + params_of(model.recon_decoder), params_of(model.encoder)
        for t in range(3):
            pretrain_step(model, opt, [small_corpus[i] for i in range(t, 30, 8)], cfg, t)
        dec1 = params_of(model.cls_decoder) + params_of(model.recon_decoder)
        assert all(torch.equal(a, b) for a, b in zip(dec0, dec1))
        assert any(not torch.equal(a, b) for a, b in zip(enc0, params_of(model.encoder)))

    def test_split_lr_encoder_frozen(self, small_corpus):
        cfg = tiny(lr_encoder=0.0)
        model = build_pretrain_model(cfg)
        opt = make_optimizer(model, cfg)
        enc0 = params_of(model.encoder)
        pretrain_step(model, opt, [small_corpus[i] for i in range(4)], cfg, 0)
        assert all(torch.equal(a, b) for a, b in zip(enc0, params_of(model.encoder)))

    def test_non_finite_aborts(self, small_corpus):
        cfg = tiny()
        model = build_pretrain_model(cfg)
        with torch.no_grad():
            model.recon_decoder.body[-1].bias.fill_(float("nan"))
        opt = make_optimizer(model, cfg)
        batch = [small_corpus[i] for i in range(4)]
        with pytest.raises(NonFiniteLossError) as info:
            pretrain_step(model, opt, batch, cfg, 123, iteration=7)
        err = info.value
        assert err.iteration == 7 and err.seed == 123
        assert err.batch_ids == [s.id for s in batch]

    def test_single_class_learned_quickly(self, small_corpus):
        idx = [i for i, l in enumerate(small_corpus.labels) if l == 2]
        cfg = tiny(cls_width=16)
        model = build_pretrain_model(cfg)
        opt = make_optimizer(model, cfg)
        cls = [pretrain_step(model, opt, [small_corpus[i] for i in idx[:4]], cfg, t).cls for t in range(300)]
        assert min(cls) < 0.01


class TestPretrainRun:
    def test_zero_iterations(self, small_corpus, tmp_path):
        cfg = tiny(iterations=0)
        res = pretrain_run(cfg, small_corpus, tmp_path)
        assert state_digest(res.model) == state_digest(build_pretrain_model(cfg))
        assert (tmp_path / "train_log.tsv").read_text().strip().count("\n") == 0
        ck = Checkpoint.load(tmp_path / "final.ckpt")
        assert ck.meta["iteration"] == 0
        assert state_digest(model_from_checkpoint(ck)) == state_digest(res.model)

    def test_constant_lr(self, small_corpus, tmp_path):
        res = pretrain_run(tiny(iterations=6), small_corpus, tmp_path)
        assert set(res.lrs) == {(3e-4, 1e-4)}
        rows = (tmp_path / "train_log.tsv").read_text().strip().split("\n")[1:]
        assert len(rows) == 6
        assert {tuple(r.split("\t")[4:]) for r in rows} == {("0.0003", "0.0001")}

    def test_resume_matches_uninterrupted(self, small_corpus, tmp_path):
        cfg = tiny(iterations=8, checkpoint_every=3)
        full = pretrain_run(cfg, small_corpus, tmp_path / "full")
        resumed = pretrain_run(cfg, small_corpus, tmp_path / "part", resume=tmp_path / "full" / "ckpt_000003.ckpt")
        assert state_digest(full.model) == state_digest(resumed.model)
        assert full.checkpoint.meta["loss_digest"] == resumed.checkpoint.meta["loss_digest"]
        assert (tmp_path / "full" / "final.ckpt").read_bytes() == (tmp_path / "part" / "final.ckpt").read_bytes()

    def test_two_runs_identical(self, small_corpus, tmp_path):
        cfg = tiny(iterations=4)
        a = pretrain_run(cfg, small_corpus, tmp_path / "a")
        b = pretrain_run(cfg, small_corpus, tmp_path / "b")
        assert (tmp_path / "a" / "train_log.tsv").read_bytes() == (tmp_path / "b" / "train_log.tsv").read_bytes()
        assert a.checkpoint.digest() == b.checkpoint.digest()

    def test_probe_log_points(self, small_corpus, tmp_path):
        cfg = tiny(iterations=4, probe_points=3, probe_crop=16, probe_repeats=1, probe_k=3)
        res = pretrain_run(cfg, small_corpus, tmp_path)
        assert [it for it, _ in res.probe] == [0, 2, 4]
        assert all(0 <= a <= 1 for _, a in res.probe)


class TestFinetune:
    def test_cosine_endpoints(self):
        assert cosine_lr(0, 100, 3e-4, 1e-6) == 3e-4
        assert abs(cosine_lr(99, 100, 3e-4, 1e-6) - 1e-6) < 1e-9
        vals = [cosine_lr(t, 100, 3e-4, 1e-6) for t in range(100)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert abs(cosine_lr(50, 101, 1.0, 0.0) - 0.5) < 1e-12

    def test_run_records_schedule(self, small_corpus, tmp_path):
        cfg = tiny(mode="finetune", iterations=5)
        res = finetune_run(cfg, small_corpus, None, tmp_path)
        assert res.lrs[0] == 3e-4 and abs(res.lrs[-1] - 1e-6) < 1e-9
        data = json.loads((tmp_path / "report.json").read_text())
        assert set(data["families"]) == {f.name for f in Family}
        assert (tmp_path / "restoration.ckpt").exists()

    def test_zero_iterations_from_checkpoint(self, small_corpus, tmp_path):
        pre = pretrain_run(tiny(iterations=2), small_corpus, tmp_path / "pre")
        cfg = tiny(mode="finetune", iterations=0)
        res = finetune_run(cfg, small_corpus, pre.encoder_path, tmp_path / "ft")
        torch.manual_seed(0)
        direct = RestorationModel(cfg.encoder_config(masked_mode=False))
        import_encoder(pre.encoder_path, direct)
        direct.head.load_state_dict(res.model.head.state_dict())
        _, held = split_holdout(small_corpus, cfg.holdout_fraction)
        rep = evaluate_restoration(direct.eval(), small_corpus.subset(held))
        assert rep.table() == res.report.table()
        for f, score in rep.families.items():
            assert score.psnr == res.report.families[f].psnr

    def test_incompatible_init(self, small_corpus, tmp_path):
        pre = pretrain_run(tiny(iterations=0), small_corpus, tmp_path / "pre")
        cfg = tiny(mode="finetune", iterations=1, encoder={"num_blocks": 2, "channels": [4, 8]})
        with pytest.raises(Exception) as info:
            finetune_run(cfg, small_corpus, pre.encoder_path)
        assert "shape mismatch" in str(info.value)


def test_loss_drops_in_training(small_corpus, tmp_path):
    finals = []
    for seed in range(3):
        cfg = tiny(iterations=60, seed=seed, lr_encoder=1e-3, lr_decoder=1e-3)
        res = pretrain_run(cfg, small_corpus, tmp_path / str(seed))
        finals.append(np.mean([b.total for b in res.losses[-10:]]) < np.mean([b.total for b in res.losses[:3]]))
    assert sum(finals) >= 2
    assert math.isfinite(res.losses[-1].total)
