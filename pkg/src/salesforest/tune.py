"""Exhaustive grid search with a time-ordered holdout.

Every combination trains on the months before `valid_month` (after warm-up
trimming) and is scored by RMSE on `valid_month`, with predictions clipped
to the frame's clip interval first so scores match the submission regime.
All combinations share one master seed, so score differences reflect the
parameters, not sampling noise.  The result table enumerates the declared
product order; ties on RMSE keep the earliest combination.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .features import split_train_valid
from .forest import ForestParams, fit_forest, predict
from .frame import FeatureFrame
from .metrics import clip_values, rmse

GRID_ORDER = ("n_trees", "max_depth", "min_samples_split", "min_samples_leaf",
              "max_features")


@dataclass(frozen=True)
class GridSpec:
    n_trees: tuple = (100,)
    max_depth: tuple = (8, 12, 16)
    min_samples_split: tuple = (10,)
    min_samples_leaf: tuple = (2, 5)
    max_features: tuple = (1.0 / 3.0, 0.6)
    valid_month: int = -1
    master_seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        for name in GRID_ORDER:
            values = getattr(self, name)
            object.__setattr__(self, name, tuple(values))
            if not getattr(self, name):
                raise ConfigError(f"grid candidate list {name!r} is empty")
        if self.valid_month < 0:
            raise ConfigError("grid search needs a validation month")

    @property
    def n_combinations(self) -> int:
        out = 1
        for name in GRID_ORDER:
            out *= len(getattr(self, name))
        return out

    def combinations(self):
        """Parameter dicts in the declared product order."""
        lists = [getattr(self, name) for name in GRID_ORDER]
        for values in itertools.product(*lists):
            yield dict(zip(GRID_ORDER, values))


@dataclass(frozen=True)
class GridRow:
    params: dict
    rmse: float
    fit_seconds: float


@dataclass(frozen=True)
class GridResult:
    rows: list
    best_index: int

    @property
    def best_params(self) -> dict:
        return self.rows[self.best_index].params

    @property
    def best_rmse(self) -> float:
        return self.rows[self.best_index].rmse


def grid_search(frame: FeatureFrame, grid: GridSpec, threads: int = 1) -> GridResult:
    """Evaluate every combination; best = lowest RMSE, first on ties."""
    train, valid = split_train_valid(frame, grid.valid_month)
    if len(train) == 0:
        raise DataError(f"no training rows before month {grid.valid_month}")
    actual = valid.target

    rows = []
    best_index = -1
    best_rmse = np.inf
    for i, combo in enumerate(grid.combinations()):
        params = ForestParams(master_seed=grid.master_seed,
                              bootstrap=grid.bootstrap, **combo)
        started = time.perf_counter()
        try:
            model = fit_forest(train, params, threads=threads)
        except Exception as exc:
            raise DataError(f"grid combination {combo} failed: {exc}") from exc
        elapsed = time.perf_counter() - started
        preds = clip_values(predict(model, valid), frame.clip)
        score = rmse(preds, actual)
        rows.append(GridRow(params=combo, rmse=score, fit_seconds=elapsed))
        if score < best_rmse:
            best_rmse = score
            best_index = i
    return GridResult(rows=rows, best_index=best_index)
