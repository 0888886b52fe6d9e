"""Splittable deterministic randomness for parallel training.

All model randomness (bootstrap resamples, per-node feature draws, member
seeds) flows from 64-bit SplitMix64 streams.  A stream is addressable: the
i-th output of ``stream(seed)`` is ``finalize(seed + (i+1)*GAMMA)``, so any
slice can be generated independently, in any order, on any worker, and the
result never depends on scheduling.

Derivation rule (documented contract, relied on by tests and the model file
format): child seed ``k`` of ``seed`` is the k-th stream output,
``derive(seed, k) = stream(seed)[k]``.  Trees use ``derive(master_seed, t)``;
within a tree, the bootstrap stream is seeded by ``derive(tree_seed, 0)`` and
node ``j``'s feature-sampling stream by ``derive(tree_seed, j + 1)``.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive(seed: int, k: int) -> int:
    """Child seed k of `seed` (the k-th SplitMix64 output)."""
    return _finalize((seed + (k + 1) * _GAMMA) & _MASK)


def stream_u64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs [start, start+count) of the stream, as uint64."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def bootstrap_indices(seed: int, n: int) -> np.ndarray:
    """n draws with replacement from [0, n), from stream(seed).

    Maps each 64-bit output by modulo; the bias is < n / 2**64 and irrelevant
    at these sizes.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    return (stream_u64(seed, 0, n) % np.uint64(n)).astype(np.int64)


def sample_features(seed: int, n_features: int, k: int) -> np.ndarray:
    """k distinct feature indices from stream(seed), returned ascending.

    Partial Fisher-Yates over [0, n_features); ascending order is what gives
    the documented lowest-feature-index tie-break its meaning.  Draw j is
    stream output j (scalar walk here: this runs once per tree node and k is
    small).
    """
    if not 1 <= k <= n_features:
        raise ValueError("k must be in [1, n_features]")
    if k == n_features:
        return np.arange(n_features, dtype=np.int64)
    pool = list(range(n_features))
    state = seed & _MASK
    for j in range(k):
        state = (state + _GAMMA) & _MASK
        r = j + _finalize(state) % (n_features - j)
        pool[j], pool[r] = pool[r], pool[j]
    out = np.array(sorted(pool[:k]), dtype=np.int64)
    return out
