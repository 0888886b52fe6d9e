import numpy as np
import pytest

from salesforest.rng import bootstrap_indices, derive, sample_features, stream_u64


def test_stream_is_addressable():
    seed = 123456789
    whole = stream_u64(seed, 0, 100)
    assert np.array_equal(whole[40:70], stream_u64(seed, 40, 30))
    assert int(whole[7]) == derive(seed, 7)


def test_derive_changes_with_seed_and_slot():
    vals = {derive(s, k) for s in range(20) for k in range(20)}
    assert len(vals) == 400


def test_bootstrap_indices_cover_range():
    idx = bootstrap_indices(derive(0, 0), 1000)
    assert idx.shape == (1000,)
    assert idx.min() >= 0 and idx.max() < 1000
    assert idx.dtype == np.int64
    # with replacement: essentially impossible to be a permutation
    assert len(np.unique(idx)) < 1000


def test_bootstrap_rejects_empty():
    with pytest.raises(ValueError):
        bootstrap_indices(1, 0)


@pytest.mark.parametrize("n_features,k", [(1, 1), (5, 2), (11, 4), (11, 11)])
def test_sample_features_distinct_sorted_in_range(n_features, k):
    for seed in range(50):
        out = sample_features(derive(seed, 0), n_features, k)
        assert len(out) == k
        assert len(set(out.tolist())) == k
        assert np.array_equal(out, np.sort(out))
        assert out.min() >= 0 and out.max() < n_features


def test_sample_features_deterministic():
    a = sample_features(987, 12, 5)
    b = sample_features(987, 12, 5)
    assert np.array_equal(a, b)


def test_sample_features_uniformish():
    # every feature index should be drawn sometimes
    seen = set()
    for seed in range(200):
        seen.update(sample_features(seed, 8, 3).tolist())
    assert seen == set(range(8))


def test_sample_features_bad_k():
    with pytest.raises(ValueError):
        sample_features(0, 4, 0)
    with pytest.raises(ValueError):
        sample_features(0, 4, 5)
