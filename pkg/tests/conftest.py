import numpy as np
import pytest

from salesforest.datasets import DailySalesTable
from salesforest.features import (FeatureRecipe, add_features, aggregate_monthly,
                                  append_test, build_matrix, clip_target)
from salesforest.frame import FeatureFrame
from salesforest.synth import SynthConfig, generate_synthetic


def make_sales(rows):
    """Rows of (date 'YYYY-MM-DD', month, shop, item, price, cnt)."""
    return DailySalesTable(
        dates=np.array([r[0] for r in rows], dtype="datetime64[D]"),
        month_index=np.array([r[1] for r in rows], dtype=np.int64),
        shop_id=np.array([r[2] for r in rows], dtype=np.int64),
        item_id=np.array([r[3] for r in rows], dtype=np.int64),
        item_price=np.array([r[4] for r in rows], dtype=np.float64),
        item_cnt_day=np.array([r[5] for r in rows], dtype=np.float64),
    )


def make_frame(X, y, month=None):
    """Feature frame straight from arrays, for forest-level tests."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    return FeatureFrame(
        month=np.zeros(n, dtype=np.int64) if month is None
        else np.asarray(month, dtype=np.int64),
        shop=np.zeros(n, dtype=np.int64),
        item=np.zeros(n, dtype=np.int64),
        target=y,
        row_id=np.full(n, -1, dtype=np.int64),
        features={f"f{j}": np.ascontiguousarray(X[:, j])
                  for j in range(X.shape[1])},
    )


SMALL_SYNTH = SynthConfig(n_shops=6, n_items=40, n_categories=5, n_months=16,
                          base_rate=3.0, seasonal_amplitude=0.25, trend=1.01,
                          noise_seed=42)

SMALL_RECIPE = FeatureRecipe(target_lags=(1, 2, 3),
                             group_mean_lags=(("item", 1), ("shop", 1),
                                              ("category", 1)))


def featurize_synth(cfg: SynthConfig, recipe: FeatureRecipe = SMALL_RECIPE,
                    with_test: bool = True):
    """The standard pipeline over a synthetic dataset."""
    sales, catalog, test, truth = generate_synthetic(cfg)
    monthly = aggregate_monthly(sales)
    frame = build_matrix(monthly, range(cfg.n_months))
    frame = clip_target(frame, 0.0, 20.0)
    if with_test:
        frame = append_test(frame, test, catalog)
    frame = add_features(frame, monthly, catalog, recipe)
    return frame, monthly, catalog, test, truth


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(SMALL_SYNTH)


@pytest.fixture(scope="session")
def small_frame():
    frame, *_ = featurize_synth(SMALL_SYNTH)
    return frame
