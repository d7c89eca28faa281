"""kNN degradation-classification probe over frozen encoder features.

Each sample's degraded image is centre-cropped, optionally masked, passed
through the encoder and its deepest tapped feature is flattened.  The
resulting vectors are split 2:1 per family into train/test and test vectors
are labelled by Euclidean k-nearest-neighbour vote.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import InvalidParameterError
from .masking import generate_mask
from .seeding import derive_seed


@dataclass(frozen=True)
class ProbeDataset:
    features: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int
    is_train: np.ndarray  # (N,) bool

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.is_train], self.labels[self.is_train]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[~self.is_train], self.labels[~self.is_train]

    def with_labels(self, labels) -> "ProbeDataset":
        return ProbeDataset(self.features, np.asarray(labels), self.is_train)


def stratified_split(labels, seed: int, train_share: float = 2 / 3) -> np.ndarray:
    """Boolean train mask holding ``round(train_share * n_f)`` samples of each family."""
    labels = np.asarray(labels)
    is_train = np.zeros(labels.size, dtype=bool)
    rng = np.random.default_rng(derive_seed(seed, "split"))
    for fam in np.unique(labels):
        idx = np.flatnonzero(labels == fam)
        idx = idx[rng.permutation(idx.size)]
        is_train[idx[: int(round(train_share * idx.size))]] = True
    return is_train


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape[:2]
    if size > min(h, w):
        raise InvalidParameterError(f"crop {size} exceeds image size {h}x{w}")
    top, left = (h - size) // 2, (w - size) // 2
    return img[top : top + size, left : left + size]


def _encoder_of(model):
    return model.encoder if hasattr(model, "encoder") else model


@torch.no_grad()
def encode_samples(
    model,
    samples,
    crop_size: int = 32,
    mask_ratio: float = 0.0,
    seed: int = 0,
    patch_size: int = 8,
    method="random",
    batch_size: int = 32,
) -> tuple[np.ndarray, np.ndarray]:
    """Flattened deepest-tap features and family labels for ``samples``."""
    encoder = _encoder_of(model)
    was_training = encoder.training
    encoder.eval()
    feats, labels = [], []
    n = len(samples)
    for start in range(0, n, batch_size):
        chunk = [samples[i] for i in range(start, min(n, start + batch_size))]
        x = np.stack([center_crop(s.lq, crop_size) for s in chunk]).astype(np.float32)
        xt = torch.from_numpy(x).permute(0, 3, 1, 2).contiguous()
        kept = None
        if mask_ratio > 0:
            masks = [
                generate_mask(crop_size, crop_size, patch_size, mask_ratio, method, derive_seed(seed, "probe-mask", start + j))
                for j in range(len(chunk))
            ]
            kept = torch.from_numpy(np.stack([m.pixel_kept() for m in masks])[:, None].astype(np.float32))
            xt = xt * kept
        pyr = encoder(xt, kept)
        feats.append(pyr.deepest.reshape(len(chunk), -1).double().numpy())
        labels.extend(s.label for s in chunk)
    encoder.train(was_training)
    return np.concatenate(feats), np.asarray(labels, dtype=np.int64)


def extract_probe_features(
    model, samples, crop_size: int = 32, mask_ratio: float = 0.0, seed: int = 0, patch_size: int = 8, method="random"
) -> ProbeDataset:
    if not 0 <= mask_ratio <= 1:
        raise InvalidParameterError(f"mask_ratio must lie in [0, 1], got {mask_ratio}")
    feats, labels = encode_samples(model, samples, crop_size, mask_ratio, seed, patch_size, method)
    return ProbeDataset(feats, labels, stratified_split(labels, seed))


def _vote(labels: np.ndarray, dists: np.ndarray) -> int:
    uniq = np.unique(labels)
    counts = np.array([np.count_nonzero(labels == u) for u in uniq])
    sums = np.array([dists[labels == u].sum() for u in uniq])
    # Most votes, then smallest summed distance, then lowest label.
    order = np.lexsort((uniq, sums, -counts))
    return int(uniq[order[0]])


def knn_classify(train_features, train_labels, query, k: int = 5) -> int:
    """Majority vote of the ``k`` Euclidean-nearest training vectors.

    Equal distances are ordered by training index.  Vote ties go to the label
    with the smaller summed neighbour distance, then to the lower label.
    """
    return int(knn_predict(train_features, train_labels, np.asarray(query)[None], k)[0])


def knn_predict(train_features, train_labels, queries, k: int = 5) -> np.ndarray:
    train = np.asarray(train_features, dtype=np.float64)
    labels = np.asarray(train_labels)
    queries = np.asarray(queries, dtype=np.float64)
    if train.shape[0] == 0:
        raise InvalidParameterError("kNN needs a non-empty training set")
    if not 1 <= k <= train.shape[0]:
        raise InvalidParameterError(f"k={k} must lie in [1, {train.shape[0]}]")
    out = np.empty(queries.shape[0], dtype=np.int64)
    index = np.arange(train.shape[0])
    for q in range(queries.shape[0]):
        d = np.sqrt(((train - queries[q]) ** 2).sum(axis=1))
        nn = np.lexsort((index, d))[:k]
        out[q] = _vote(labels[nn], d[nn])
    return out


def dataset_accuracy(ds: ProbeDataset, k: int = 5) -> float:
    (xtr, ytr), (xte, yte) = ds.train, ds.test
    if yte.size == 0:
        raise InvalidParameterError("probe test split is empty")
    return float(np.mean(knn_predict(xtr, ytr, xte, k) == yte))


def probe_accuracy(
    model,
    samples,
    mask_ratio: float = 0.0,
    k: int = 5,
    seed: int = 0,
    repeats: int = 5,
    crop_size: int = 32,
    patch_size: int = 8,
    method="random",
) -> float:
    """Mean test accuracy over ``repeats`` derived seeds (fresh split and masks each)."""
    labels = np.array([s.label for s in samples]) if not hasattr(samples, "labels") else samples.labels
    if np.unique(labels).size < 2:
        raise InvalidParameterError("probe needs at least two degradation families")
    accs = []
    cached = None
    for r in range(repeats):
        s = derive_seed(seed, "probe", r)
        if mask_ratio == 0:
            # Features do not depend on the seed without masking.
            if cached is None:
                cached = encode_samples(model, samples, crop_size, 0.0, s, patch_size, method)
            feats, labs = cached
            ds = ProbeDataset(feats, labs, stratified_split(labs, s))
        else:
            ds = extract_probe_features(model, samples, crop_size, mask_ratio, s, patch_size, method)
        accs.append(dataset_accuracy(ds, k))
    return float(np.mean(accs))


def mask_ratio_sweep(model, samples, ratios, k: int = 5, seed: int = 0, **kw) -> list[tuple[float, float]]:
    for r in ratios:
        if not 0 <= r <= 1:
            raise InvalidParameterError(f"mask ratio {r} outside [0, 1]")
    return [(float(r), probe_accuracy(model, samples, r, k, seed, **kw)) for r in ratios]


def write_sweep(rows, path, chart_path=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["mask_ratio", "accuracy"])
        for r, a in rows:
            w.writerow([f"{r:.4f}", f"{a:.6f}"])
    if chart_path is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot([r for r, _ in rows], [a for _, a in rows], marker="o")
        ax.set_xlabel("mask ratio")
        ax.set_ylabel("kNN accuracy")
        fig.tight_layout()
        fig.savefig(chart_path)
        plt.close(fig)
    return path
