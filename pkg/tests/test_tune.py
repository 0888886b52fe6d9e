import numpy as np
import pytest

from salesforest.errors import ConfigError, DataError
from salesforest.tune import GRID_ORDER, GridSpec, grid_search

from conftest import make_frame


def learnable_frame(seed=0, n_months=6, rows_per_month=40):
    rng = np.random.default_rng(seed)
    n = n_months * rows_per_month
    month = np.repeat(np.arange(n_months), rows_per_month)
    x0 = rng.integers(0, 2, n).astype(np.float64)
    x1 = rng.normal(size=n)
    y = 6.0 * x0 + rng.normal(size=n) * 0.05
    frame = make_frame(np.column_stack([x0, x1]), y, month=month)
    return frame


def spec(valid_month=5, **overrides):
    fields = dict(n_trees=(5,), max_depth=(4,), min_samples_split=(2,),
                  min_samples_leaf=(1,), max_features=(1.0,),
                  valid_month=valid_month, master_seed=1)
    fields.update(overrides)
    return GridSpec(**fields)


class TestGridSpec:
    def test_combination_count(self):
        grid = spec(n_trees=(5, 10), max_depth=(2, 4), max_features=(0.5, 1.0))
        assert grid.n_combinations == 8
        assert len(list(grid.combinations())) == 8

    def test_declared_product_order(self):
        grid = spec(n_trees=(5, 10), max_depth=(2, 4))
        combos = list(grid.combinations())
        assert [c["n_trees"] for c in combos] == [5, 5, 10, 10]
        assert [c["max_depth"] for c in combos] == [2, 4, 2, 4]

    def test_empty_candidate_list_rejected(self):
        with pytest.raises(ConfigError, match="max_depth"):
            spec(max_depth=())

    def test_needs_valid_month(self):
        with pytest.raises(ConfigError, match="validation month"):
            GridSpec(valid_month=-1)


class TestGridSearch:
    def test_single_combination(self):
        result = grid_search(learnable_frame(), spec())
        assert len(result.rows) == 1
        assert result.best_index == 0
        assert result.best_rmse == result.rows[0].rmse

    def test_depth_beats_root_leaf_on_separable_data(self):
        frame = learnable_frame()
        result = grid_search(frame, spec(max_depth=(0, 8)))
        assert len(result.rows) == 2
        # depth 0 predicts one constant; depth 8 isolates the binary feature
        assert result.best_params["max_depth"] == 8
        assert result.rows[1].rmse < result.rows[0].rmse

    def test_exact_tie_keeps_declaration_order(self):
        # y is a pure function of the binary feature, so every tree is pure
        # at depth 1; both depth caps yield identical models, hence an exact
        # score tie broken by declaration order
        rng = np.random.default_rng(7)
        n_months, rows = 6, 40
        month = np.repeat(np.arange(n_months), rows)
        x0 = rng.integers(0, 2, n_months * rows).astype(np.float64)
        frame = make_frame(np.column_stack([x0, np.zeros_like(x0)]),
                           6.0 * x0, month=month)
        result = grid_search(frame, spec(max_depth=(6, 9)))
        assert result.rows[0].rmse == result.rows[1].rmse
        assert result.best_index == 0
        assert result.best_params["max_depth"] == 6

    def test_exhaustive_two_cubed(self):
        frame = learnable_frame()
        grid = spec(n_trees=(2, 4), max_depth=(1, 3), min_samples_leaf=(1, 2))
        result = grid_search(frame, grid)
        assert len(result.rows) == 8
        combos = [tuple(r.params[k] for k in GRID_ORDER) for r in result.rows]
        assert combos == sorted(set(combos), key=combos.index)  # unique, ordered
        assert result.best_rmse == min(r.rmse for r in result.rows)

    def test_deterministic_given_seed(self):
        frame = learnable_frame()
        grid = spec(n_trees=(3, 5), max_depth=(2, 4))
        a = grid_search(frame, grid)
        b = grid_search(frame, grid)
        assert [r.rmse for r in a.rows] == [r.rmse for r in b.rows]

    def test_validation_scores_are_clipped(self):
        frame = learnable_frame().replace(clip=(0.0, 1.0))
        result = grid_search(frame, spec())
        # targets reach 6; with predictions clipped to [0, 1] the best
        # possible rmse is bounded well away from the unclipped fit
        assert result.best_rmse > 2.0

    def test_missing_valid_month_propagates(self):
        with pytest.raises(DataError):
            grid_search(learnable_frame(), spec(valid_month=77))

    def test_fit_error_names_combination(self):
        frame = learnable_frame()
        frame.features["f0"][0] = np.nan
        with pytest.raises(DataError, match="max_depth"):
            grid_search(frame, spec())
