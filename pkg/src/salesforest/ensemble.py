"""Seed-averaged forest ensembles and out-of-fold stacking.

The mean ensemble trains k forests that differ only in their master seed
(derived from one ensemble seed) and averages their predictions.  Stacking
partitions the training months into contiguous fold blocks, collects
out-of-fold predictions per base configuration, fits an OLS meta-learner
(intercept plus one weight per base) by the normal equations, and refits
every base on the full training region for inference.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .forest import ForestParams, fit_forest, predict
from .frame import FeatureFrame
from .rng import derive

log = logging.getLogger(__name__)

# numerically singular normal equations get the equal-weights fallback
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class EnsembleSpec:
    k: int = 5
    seed: int = 0
    params: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("ensemble size k must be >= 1")

    def member_seeds(self) -> list:
        seeds = [derive(self.seed, m) for m in range(self.k)]
        if len(set(seeds)) != len(seeds):  # pragma: no cover - 64-bit collision
            raise RuntimeError("derived member seeds collided; change the seed")
        return seeds


def fit_mean_ensemble(frame: FeatureFrame, spec: EnsembleSpec,
                      threads: int = 1) -> list:
    """k forests sharing params, differing only in master_seed."""
    members = []
    for seed in spec.member_seeds():
        params = ForestParams.from_dict({**spec.params.to_dict(),
                                         "master_seed": seed})
        members.append(fit_forest(frame, params, threads=threads))
    return members


def predict_mean_ensemble(models, frame: FeatureFrame) -> np.ndarray:
    """Per-row arithmetic mean of the member predictions."""
    if not models:
        raise ValueError("ensemble has no members")
    acc = np.zeros(len(frame), dtype=np.float64)
    for model in models:
        acc += predict(model, frame)
    return acc / len(models)


@dataclass
class MeanEnsemble:
    """A trained mean ensemble, as reloaded from its manifest."""

    members: list
    member_seeds: list

    def predict(self, frame: FeatureFrame) -> np.ndarray:
        return predict_mean_ensemble(self.members, frame)


@dataclass
class StackedModel:
    base_params: list
    folds: int
    weights: np.ndarray          # one coefficient per base model
    intercept: float
    models: list                 # bases refit on the full training region
    fold_months: list            # contiguous month blocks used for OOF

    def predict(self, frame: FeatureFrame) -> np.ndarray:
        return predict_stacked(self, frame)


def _stack_region(frame: FeatureFrame, valid_month):
    """Row indices of the stacking training region (post warm-up, before
    valid_month when one is held out)."""
    mask = frame.train_mask() & (frame.month >= frame.max_lag)
    if valid_month is not None:
        mask &= frame.month < valid_month
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise DataError("no training rows available for stacking")
    return idx


def month_fold_blocks(months: np.ndarray, folds: int) -> list:
    """Split the sorted unique months into `folds` contiguous blocks."""
    uniq = np.unique(months)
    if len(uniq) < folds:
        raise DataError(
            f"cannot build {folds} month folds from {len(uniq)} training months")
    return [block for block in np.array_split(uniq, folds)]


def compute_oof(frame: FeatureFrame, base_specs, folds: int,
                valid_month=None, threads: int = 1):
    """Out-of-fold prediction matrix over the stacking region.

    Returns (oof, y, region_idx, fold_of_row); oof[i, b] is base b's
    prediction for region row i, produced by a model that never saw row i's
    fold.
    """
    if folds < 2:
        raise ValueError("stacking needs folds >= 2")
    if not base_specs:
        raise ValueError("stacking needs at least one base configuration")
    region_idx = _stack_region(frame, valid_month)
    region = frame.take(region_idx)
    blocks = month_fold_blocks(region.month, folds)

    fold_of_row = np.full(len(region), -1, dtype=np.int64)
    for f, block in enumerate(blocks):
        fold_of_row[np.isin(region.month, block)] = f

    oof = np.full((len(region), len(base_specs)), np.nan, dtype=np.float64)
    for f in range(folds):
        holdout = fold_of_row == f
        fit_frame = region.take(np.nonzero(~holdout)[0])
        hold_frame = region.take(np.nonzero(holdout)[0])
        for b, params in enumerate(base_specs):
            model = fit_forest(fit_frame, params, threads=threads)
            oof[holdout, b] = predict(model, hold_frame)
    return oof, region.target.copy(), region_idx, fold_of_row


def _solve_meta(oof: np.ndarray, y: np.ndarray):
    """OLS weights (intercept first) via the normal equations."""
    A = np.column_stack([np.ones(len(y)), oof])
    G = A.T @ A
    b = A.T @ y
    try:
        if np.linalg.cond(G) > _COND_LIMIT:
            raise np.linalg.LinAlgError("ill-conditioned normal equations")
        w = np.linalg.solve(G, b)
        if not np.all(np.isfinite(w)):
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError as exc:
        n_bases = oof.shape[1]
        message = (f"stacking meta-learner fell back to equal weights: {exc}")
        warnings.warn(message)
        log.warning(message)
        return np.full(n_bases, 1.0 / n_bases), 0.0
    return w[1:], float(w[0])


def fit_stacked(frame: FeatureFrame, base_specs, folds: int = 3,
                valid_month=None, threads: int = 1) -> StackedModel:
    base_specs = list(base_specs)
    oof, y, region_idx, _ = compute_oof(frame, base_specs, folds,
                                        valid_month=valid_month, threads=threads)
    weights, intercept = _solve_meta(oof, y)
    region = frame.take(region_idx)
    models = [fit_forest(region, params, threads=threads) for params in base_specs]
    return StackedModel(base_params=base_specs, folds=folds, weights=weights,
                        intercept=intercept, models=models,
                        fold_months=[b.tolist() for b in
                                     month_fold_blocks(region.month, folds)])


def predict_stacked(model: StackedModel, frame: FeatureFrame) -> np.ndarray:
    """intercept + sum_b weight_b * base_b(frame)."""
    out = np.full(len(frame), model.intercept, dtype=np.float64)
    for w, base in zip(model.weights, model.models):
        out += w * predict(base, frame)
    return out
