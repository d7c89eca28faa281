import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskdcpt.errors import InvalidParameterError, InvalidShapeError
from maskdcpt.masking import (
    MaskingMethod,
    MaskMap,
    adjacency_count,
    apply_mask,
    expected_random_adjacency,
    generate_mask,
    mask_ratio_of,
)

METHODS = list(MaskingMethod)


def test_full_scale_defaults_count():
    m = generate_mask(256, 256, 16, 0.5, "random", seed=0)
    assert m.num_patches == 256
    assert m.num_masked == 128


@pytest.mark.parametrize("method", METHODS)
def test_extreme_ratios(method):
    assert generate_mask(64, 64, 8, 0.0, method).grid.all()
    assert not generate_mask(64, 64, 8, 1.0, method).grid.any()


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("ratio", [0.0, 0.1, 0.25, 0.33, 0.5, 0.75, 0.9, 1.0])
def test_exact_count(method, ratio):
    for seed in range(5):
        m = generate_mask(96, 64, 8, ratio, method, seed)
        total = m.num_patches
        assert abs(m.num_masked / total - ratio) <= 0.5 / total + 1e-12
        assert m.ratio == mask_ratio_of(m) == m.num_masked / total


def test_indivisible_rejected():
    with pytest.raises(InvalidShapeError):
        generate_mask(30, 32, 8, 0.5)
    with pytest.raises(InvalidParameterError):
        generate_mask(32, 32, 8, 1.5)


def test_random_per_patch_frequency():
    counts = np.zeros((8, 8))
    n = 10_000
    for s in range(n):
        counts += ~generate_mask(64, 64, 8, 0.5, "random", s).grid
    freq = counts / n
    bound = 4 * np.sqrt(0.25 / n)
    assert np.all(np.abs(freq - 0.5) <= bound)


def test_distinct_seeds_distinct_masks():
    for method in ("random", "block_wise"):
        grids = {generate_mask(64, 64, 8, 0.5, method, s).grid.tobytes() for s in range(100)}
        assert len(grids) == 100


def test_same_seed_same_mask():
    for method in METHODS:
        a = generate_mask(64, 64, 8, 0.4, method, 17)
        b = generate_mask(64, 64, 8, 0.4, method, 17)
        assert np.array_equal(a.grid, b.grid)


@pytest.mark.parametrize("method", ["square", "block_wise"])
@pytest.mark.parametrize("ratio", [0.25, 0.5, 0.75])
def test_contiguous_methods_have_fewer_boundaries(method, ratio):
    gh = gw = 8
    n_mask = round(ratio * 64)
    expected = expected_random_adjacency(gh, gw, n_mask)
    adj = [adjacency_count(generate_mask(64, 64, 8, ratio, method, s)) for s in range(50)]
    assert max(adj) < expected


def test_expected_adjacency_matches_simulation():
    sims = [adjacency_count(generate_mask(64, 64, 8, 0.5, "random", s)) for s in range(3000)]
    assert abs(np.mean(sims) - expected_random_adjacency(8, 8, 32)) < 0.3


def test_square_is_centered():
    m = generate_mask(64, 64, 8, 16 / 64, "square", 0)
    masked = ~m.grid
    assert masked[2:6, 2:6].all() and masked.sum() == 16


class TestApplyMask:
    def test_all_kept_identity(self, rng):
        x = rng.uniform(size=(32, 32, 3))
        out = apply_mask(x, generate_mask(32, 32, 8, 0.0))
        assert np.array_equal(out, x)

    def test_all_masked_zero(self, rng):
        x = rng.uniform(size=(32, 32, 3))
        assert not apply_mask(x, generate_mask(32, 32, 8, 1.0)).any()

    def test_half_mask_mean(self):
        out = apply_mask(np.ones((64, 64, 3)), generate_mask(64, 64, 8, 0.5, seed=3))
        assert out.mean() == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(InvalidShapeError):
            apply_mask(np.ones((32, 40, 3)), generate_mask(32, 32, 8, 0.5))

    def test_fill_value(self):
        out = apply_mask(np.zeros((16, 16)), generate_mask(16, 16, 4, 1.0), fill=0.25)
        assert np.all(out == 0.25)


@settings(max_examples=40, deadline=None)
@given(
    gh=st.integers(1, 8),
    gw=st.integers(1, 8),
    p=st.sampled_from([1, 2, 4]),
    ratio=st.floats(0, 1),
    method=st.sampled_from(METHODS),
    seed=st.integers(0, 10_000),
)
def test_kept_region_untouched(gh, gw, p, ratio, method, seed):
    h, w = gh * p, gw * p
    x = np.random.default_rng(seed).uniform(size=(h, w, 2))
    m = generate_mask(h, w, p, ratio, method, seed)
    out = apply_mask(x, m)
    kept = m.pixel_kept()
    assert np.array_equal(out[kept], x[kept])
    assert not out[~kept].any()
    assert abs(m.ratio - ratio) <= 0.5 / m.num_patches + 1e-12


def test_mask_serialization_roundtrip():
    m = generate_mask(48, 64, 8, 0.3, "block_wise", 99)
    back = MaskMap.from_bytes(m.to_bytes())
    assert np.array_equal(back.grid, m.grid)
    assert (back.patch_size, back.method, back.seed) == (8, MaskingMethod.BLOCK_WISE, 99)


def test_ratio_example_thirteen_of_sixtyfour():
    grid = np.ones((8, 8), dtype=bool)
    grid.flat[:13] = False
    assert mask_ratio_of(MaskMap(8, grid)) == 0.203125


def test_generated_ratio_inverse_consistent():
    m = generate_mask(64, 64, 8, 0.75, seed=2)
    assert abs(mask_ratio_of(m) - 0.75) <= 1 / 64
