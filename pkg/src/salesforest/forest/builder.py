"""CART regression trees and bagged forests.

Splits maximize the SSE decrease ``SSE(parent) - SSE(left) - SSE(right)``
over thresholds at midpoints between consecutive distinct sorted feature
values; ties break to the lowest feature index, then the lowest threshold.
Leaves predict the mean of their training targets.

Randomness is fully splittable (see salesforest.rng): tree t draws its
bootstrap from ``derive(master_seed, t)``, and each node's candidate
features come from a stream addressed by the node's path from the root, so
a model is a pure function of (frame, params) no matter how many workers
train it, and trees grown with a larger max_depth extend the shallower ones
node for node.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..frame import FeatureFrame
from ..rng import bootstrap_indices, derive
from .backend import kernel


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_split: int = 10
    min_samples_leaf: int = 5
    max_features: float = 1.0 / 3.0
    bootstrap: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 (0 = root-only leaf)")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must be a fraction in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees, "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features, "bootstrap": self.bootstrap,
            "master_seed": self.master_seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ForestParams":
        return ForestParams(**{k: d[k] for k in ForestParams().to_dict() if k in d})


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    threshold: float
    impurity_reduction: float
    n_left: int
    n_right: int


@dataclass
class RegressionTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray    # int32
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32, -1 at leaves
    right: np.ndarray      # int32
    value: np.ndarray      # float64, node mean (the prediction at leaves)
    reduction: np.ndarray  # float64, SSE decrease of the node's split
    n_samples: np.ndarray  # int64
    depth: int
    seed: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_matrix(self, X: np.ndarray, out=None) -> np.ndarray:
        if out is None:
            out = np.empty(X.shape[0], dtype=np.float64)
        kernel.predict_tree(self.feature, self.threshold, self.left, self.right,
                            self.value, X, out)
        return out


@dataclass
class ForestModel:
    trees: list
    params: ForestParams
    feature_names: list
    importance_raw: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.importance_raw is None:
            acc = np.zeros(len(self.feature_names), dtype=np.float64)
            for tree in self.trees:
                internal = tree.feature >= 0
                np.add.at(acc, tree.feature[internal], tree.reduction[internal])
            self.importance_raw = acc

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0], dtype=np.float64)
        buf = np.empty(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_matrix(X, buf)
        return acc / len(self.trees)

    def predict(self, frame: FeatureFrame) -> np.ndarray:
        return predict(self, frame)


def best_split(X: np.ndarray, y: np.ndarray, candidate_features,
               params: ForestParams):
    """Best (feature, threshold) over the candidates, or None.

    Exposed for the split-oracle tests; fit_tree goes through the same
    kernel call per candidate feature.
    """
    n = y.shape[0]
    if n < params.min_samples_split:
        return None
    s = float(y.sum())
    sse_parent = float(np.dot(y, y)) - s * s / n
    cand = np.array(sorted(int(f) for f in candidate_features), dtype=np.int64)
    f, thr, red, n_left = kernel.best_split_node(
        np.ascontiguousarray(X, dtype=np.float64),
        np.arange(n, dtype=np.int64), cand,
        np.ascontiguousarray(y, dtype=np.float64), sse_parent,
        params.min_samples_leaf)
    if f < 0:
        return None
    return SplitDecision(feature=f, threshold=thr, impurity_reduction=red,
                         n_left=n_left, n_right=n - n_left)


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams,
               tree_seed: int) -> RegressionTree:
    n_features = X.shape[1]
    k_cand = min(n_features, max(1, math.ceil(params.max_features * n_features)))
    (feature, threshold, left, right, value, reduction, n_samples,
     depth) = kernel.grow_tree(X, y, params.max_depth,
                               params.min_samples_split,
                               params.min_samples_leaf, k_cand, tree_seed)
    return RegressionTree(feature=feature, threshold=threshold, left=left,
                          right=right, value=value, reduction=reduction,
                          n_samples=n_samples, depth=depth, seed=tree_seed)


def _training_arrays(frame: FeatureFrame):
    if not frame.features:
        raise DataError("frame has no feature columns; run add_features first")
    tm = frame.train_mask()
    if not tm.any():
        raise DataError("frame has no training rows with targets")
    X = frame.feature_matrix()[tm]
    y = frame.target[tm]
    if not np.isfinite(X).all():
        raise DataError("feature columns must be dense and finite "
                        "(missing values are filled upstream)")
    if not np.isfinite(y).all():
        raise DataError("training targets must be finite")
    return np.ascontiguousarray(X), np.ascontiguousarray(y)


def fit_tree(frame: FeatureFrame, params: ForestParams, tree_seed: int) -> RegressionTree:
    """Grow one tree on the frame's training rows (no bootstrap here)."""
    X, y = _training_arrays(frame)
    return _grow_tree(X, y, params, tree_seed)


def fit_forest(frame: FeatureFrame, params: ForestParams,
               threads: int = 1) -> ForestModel:
    """Train `params.n_trees` bagged trees; identical output for any
    `threads` value.

    The thread pool only engages on the compiled backend, whose tree
    kernel runs without the GIL; the pure-python backend is GIL-bound, so
    threading it would just add contention.
    """
    X, y = _training_arrays(frame)
    n = X.shape[0]

    def fit_one(t: int) -> RegressionTree:
        tree_seed = derive(params.master_seed, t)
        if params.bootstrap:
            rows = bootstrap_indices(derive(tree_seed, 0), n)
            Xb = np.ascontiguousarray(X[rows])
            yb = np.ascontiguousarray(y[rows])
        else:
            Xb, yb = X, y
        return _grow_tree(Xb, yb, params, tree_seed)

    if threads and threads > 1 and kernel.BACKEND == "compiled":
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(fit_one, range(params.n_trees)))
    else:
        trees = [fit_one(t) for t in range(params.n_trees)]
    return ForestModel(trees=trees, params=params,
                       feature_names=list(frame.feature_names))


def predict(model: ForestModel, frame: FeatureFrame) -> np.ndarray:
    """Per-row mean of the trees' predictions, over all frame rows."""
    X = frame.feature_matrix(model.feature_names)
    if not np.isfinite(X).all():
        raise DataError("feature columns must be dense and finite")
    return model.predict_matrix(X)


def feature_importance(model: ForestModel) -> dict:
    """Impurity-based importance, normalized to sum 1 (all zeros if the
    forest never split)."""
    total = float(model.importance_raw.sum())
    if total <= 0.0:
        return {name: 0.0 for name in model.feature_names}
    return {name: float(w / total)
            for name, w in zip(model.feature_names, model.importance_raw)}
