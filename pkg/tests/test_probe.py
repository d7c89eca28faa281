import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from maskdcpt.errors import InvalidParameterError
from maskdcpt.model import Encoder, EncoderConfig
from maskdcpt.probe import (
    ProbeDataset,
    center_crop,
    dataset_accuracy,
    extract_probe_features,
    knn_classify,
    knn_predict,
    mask_ratio_sweep,
    probe_accuracy,
    stratified_split,
    write_sweep,
)


def brute_force_knn(train, labels, q, k):
    """Exhaustive search: sort all (distance, index) pairs, then vote."""
    pairs = sorted((float(np.sqrt(sum((a - b) ** 2 for a, b in zip(row, q)))), i) for i, row in enumerate(train))
    top = pairs[:k]
    votes, sums = {}, {}
    for d, i in top:
        lab = int(labels[i])
        votes[lab] = votes.get(lab, 0) + 1
        sums[lab] = sums.get(lab, 0.0) + d
    return min(votes, key=lambda lab: (-votes[lab], sums[lab], lab))


@pytest.mark.parametrize("seed", range(10))
def test_knn_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 150))
    d = int(rng.integers(1, 6))
    train = rng.normal(size=(n, d))
    labels = rng.integers(0, 5, size=n)
    queries = rng.normal(size=(50, d))
    k = int(rng.integers(1, min(n, 9)))
    got = knn_predict(train, labels, queries, k)
    assert got.tolist() == [brute_force_knn(train, labels, q, k) for q in queries]


def test_knn_constructed_ties():
    # Integer lattice: many equidistant neighbours and tied votes.
    train = np.array(list(itertools.product(range(-2, 3), repeat=2)), dtype=float)
    for lab_seed in range(20):
        labels = np.random.default_rng(lab_seed).integers(0, 3, size=len(train))
        queries = np.array(list(itertools.product(np.arange(-2, 2.5, 0.5), repeat=2)))
        for k in (1, 2, 4, 6):
            got = knn_predict(train, labels, queries, k)
            assert got.tolist() == [brute_force_knn(train, labels, q, k) for q in queries]


def test_vote_tie_rules():
    train = np.array([[1.0], [-1.0], [2.0], [-2.0]])
    # Two votes each; summed distance 3 for both -> lower label wins.
    assert knn_classify(train, [1, 0, 1, 0], [0.0], k=4) == 0
    assert knn_classify(train, [0, 1, 0, 1], [0.0], k=4) == 0
    # Tied votes, label 3 closer in total.
    train = np.array([[1.0], [1.5], [-1.2], [-1.6]])
    assert knn_classify(train, [3, 3, 1, 1], [0.0], k=4) == 3
    # Equal distances ordered by index: first neighbour wins at k=1.
    assert knn_classify(np.array([[1.0], [-1.0]]), [4, 2], [0.0], k=1) == 4


def test_knn_errors():
    with pytest.raises(InvalidParameterError):
        knn_predict(np.zeros((0, 2)), [], np.zeros((1, 2)))
    with pytest.raises(InvalidParameterError):
        knn_predict(np.zeros((3, 2)), [0, 1, 2], np.zeros((1, 2)), k=4)


@settings(max_examples=40, deadline=None)
@given(
    data=hnp.arrays(np.float64, (30, 3), elements=st.floats(-10, 10)),
    scale=st.floats(0.01, 100),
    seed=st.integers(0, 100),
)
def test_uniform_scaling_invariance(data, scale, seed):
    labels = np.arange(30) % 5
    ds = ProbeDataset(data, labels, stratified_split(labels, seed))
    scaled = ProbeDataset(data * scale, labels, ds.is_train)
    a, b = knn_predict(*ds.train, ds.test[0]), knn_predict(*scaled.train, scaled.test[0])
    # Scaling can only reorder exact floating-point near-ties.
    d = np.sqrt(((ds.test[0][:, None] - ds.train[0][None]) ** 2).sum(-1))
    srt = np.sort(d, axis=1)
    clear = np.all(np.diff(srt[:, :6], axis=1) > 1e-9 * (1 + srt[:, 1:6]), axis=1)
    assert np.array_equal(a[clear], b[clear])


def test_one_hot_features_perfect():
    labels = np.repeat(np.arange(5), 9)
    feats = np.eye(5)[labels] * 10 + np.random.default_rng(0).normal(0, 0.01, (45, 5))
    for s in range(5):
        assert dataset_accuracy(ProbeDataset(feats, labels, stratified_split(labels, s))) == 1.0


def test_null_control_near_chance():
    rng = np.random.default_rng(7)
    accs = []
    for s in range(20):
        labels = np.repeat(np.arange(5), 30)
        feats = rng.normal(size=(150, 16))
        accs.append(dataset_accuracy(ProbeDataset(feats, labels, stratified_split(labels, s))))
    assert abs(np.mean(accs) - 0.2) < 0.06


@pytest.mark.parametrize("n", [3, 6, 7, 30, 31, 32])
def test_split_two_to_one(n):
    labels = np.repeat(np.arange(5), n)
    mask = stratified_split(labels, 3)
    for f in range(5):
        tr = mask[labels == f].sum()
        te = n - tr
        assert tr == round(2 * n / 3)
        assert abs(tr - 2 * te) <= 2
    assert not np.array_equal(mask, stratified_split(labels, 4)) or n < 3


def test_center_crop():
    img = np.arange(64 * 48).reshape(64, 48)
    c = center_crop(img, 32)
    assert c.shape == (32, 32) and c[0, 0] == img[16, 8]
    with pytest.raises(InvalidParameterError):
        center_crop(img, 50)


@pytest.fixture(scope="module")
def enc():
    import torch

    torch.manual_seed(0)
    return Encoder(EncoderConfig(num_blocks=2, channels=[4, 6]))


def test_feature_dimension(enc, small_corpus):
    ds = extract_probe_features(enc, small_corpus, crop_size=16, seed=0)
    assert ds.features.shape == (30, 6 * 16 * 16)
    assert ds.labels.tolist() == small_corpus.labels.tolist()


def test_probe_deterministic(enc, small_corpus):
    a = probe_accuracy(enc, small_corpus, 0.5, k=3, seed=2, repeats=2, crop_size=16, patch_size=4)
    b = probe_accuracy(enc, small_corpus, 0.5, k=3, seed=2, repeats=2, crop_size=16, patch_size=4)
    assert a == b and 0 <= a <= 1


def test_sweep_single_ratio(enc, small_corpus, tmp_path):
    rows = mask_ratio_sweep(enc, small_corpus, [0], k=3, seed=1, repeats=2, crop_size=16)
    assert rows == [(0.0, probe_accuracy(enc, small_corpus, 0, 3, 1, 2, 16))]
    path = write_sweep(rows, tmp_path / "sweep.tsv", tmp_path / "sweep.png")
    assert path.read_text().splitlines()[0] == "mask_ratio\taccuracy"
    assert (tmp_path / "sweep.png").stat().st_size > 0
    with pytest.raises(InvalidParameterError):
        mask_ratio_sweep(enc, small_corpus, [1.5])


def test_probe_needs_two_families(enc, small_corpus):
    with pytest.raises(InvalidParameterError):
        probe_accuracy(enc, small_corpus.subset([0, 1, 2]), 0, k=1, crop_size=16)
