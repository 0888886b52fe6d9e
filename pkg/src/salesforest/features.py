"""Preprocessing: outlier removal, monthly aggregation, the per-month
shop x item matrix, target clipping, test append, and lag features.

Everything here is a deterministic pure transformation; no randomness.
Joins key on (month, shop, item) packed into a single int64, which bounds
ids and month indices at 2**21 (checked at table construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Catalog, DailySalesTable, TestSet
from .errors import DataError
from .frame import FeatureFrame

GROUPINGS = ("item", "shop", "category", "item_shop")


@dataclass(frozen=True)
class OutlierPolicy:
    """Row-drop thresholds for raw transactions.

    Defaults mirror the community treatment of this dataset: daily counts
    above 1000 and prices above 100000 are discarded, as are non-positive
    prices.
    """

    max_item_cnt_day: float = 1000.0
    max_item_price: float = 100000.0
    drop_nonpositive_price: bool = True

    def __post_init__(self):
        if self.max_item_cnt_day <= 0 or self.max_item_price <= 0:
            raise ValueError("outlier thresholds must be positive")


@dataclass(frozen=True)
class MonthlyTable:
    """Per (month, shop, item): summed count and mean transaction price."""

    month: np.ndarray      # int64, sorted by (month, shop, item)
    shop: np.ndarray
    item: np.ndarray
    cnt: np.ndarray        # float64, sum of item_cnt_day over the group
    avg_price: np.ndarray  # float64, unweighted mean of the group's prices

    def __len__(self) -> int:
        return len(self.month)


@dataclass(frozen=True)
class FeatureRecipe:
    """Which derived columns to add, and the fill for unavailable lags."""

    target_lags: tuple = (1, 2, 3, 6, 12)
    group_mean_lags: tuple = (("item", 1), ("shop", 1), ("category", 1))
    include_price_lag1: bool = True
    include_month_of_year: bool = True
    include_category_id: bool = True
    missing_lag_fill: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "target_lags", tuple(int(l) for l in self.target_lags))
        object.__setattr__(self, "group_mean_lags",
                           tuple((g, int(l)) for g, l in self.group_mean_lags))
        for lag in self.target_lags:
            if lag < 1:
                raise ValueError("target lags must be >= 1")
        for group, lag in self.group_mean_lags:
            if group not in GROUPINGS:
                raise DataError(f"unknown grouping {group!r}; expected one of {GROUPINGS}")
            if lag < 1:
                raise ValueError("group-mean lags must be >= 1")

    @property
    def max_lag(self) -> int:
        lags = list(self.target_lags) + [l for _, l in self.group_mean_lags]
        if self.include_price_lag1:
            lags.append(1)
        return max(lags, default=0)

    def to_dict(self) -> dict:
        return {
            "target_lags": list(self.target_lags),
            "group_mean_lags": [list(g) for g in self.group_mean_lags],
            "include_price_lag1": self.include_price_lag1,
            "include_month_of_year": self.include_month_of_year,
            "include_category_id": self.include_category_id,
            "missing_lag_fill": self.missing_lag_fill,
        }

    @staticmethod
    def from_dict(d: dict) -> "FeatureRecipe":
        return FeatureRecipe(
            target_lags=tuple(d.get("target_lags", (1, 2, 3, 6, 12))),
            group_mean_lags=tuple(tuple(g) for g in d.get(
                "group_mean_lags", (("item", 1), ("shop", 1), ("category", 1)))),
            include_price_lag1=d.get("include_price_lag1", True),
            include_month_of_year=d.get("include_month_of_year", True),
            include_category_id=d.get("include_category_id", True),
            missing_lag_fill=float(d.get("missing_lag_fill", 0.0)),
        )


# ---------------------------------------------------------------------------
# key packing / sorted lookups

def _pack(month, shop, item):
    return (np.asarray(month, dtype=np.int64) << 42) \
        | (np.asarray(shop, dtype=np.int64) << 21) \
        | np.asarray(item, dtype=np.int64)


def _pack2(month, group):
    return (np.asarray(month, dtype=np.int64) << 21) | np.asarray(group, dtype=np.int64)


def _lookup(sorted_keys, values, query, fill):
    """values[query] for keys present, `fill` elsewhere; keys must be sorted."""
    out = np.full(len(query), fill, dtype=np.float64)
    if len(sorted_keys) == 0 or len(query) == 0:
        return out
    pos = np.searchsorted(sorted_keys, query)
    pos_c = np.minimum(pos, len(sorted_keys) - 1)
    found = sorted_keys[pos_c] == query
    out[found] = values[pos_c[found]]
    return out


def _group_reduce(keys):
    """Sorted unique keys, segment starts into the sorting order, sizes."""
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.nonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])[0]
    sizes = np.diff(np.r_[starts, len(keys)])
    return order, sorted_keys[starts], starts, sizes


# ---------------------------------------------------------------------------
# operations

def remove_outliers(sales: DailySalesTable, policy: OutlierPolicy):
    """Drop rows violating the policy; returns (table, n_removed)."""
    if len(sales) == 0:
        return sales, 0
    keep = (sales.item_cnt_day <= policy.max_item_cnt_day) \
        & (sales.item_price <= policy.max_item_price)
    if policy.drop_nonpositive_price:
        keep &= sales.item_price > 0
    n_removed = int((~keep).sum())
    if n_removed == 0:
        return sales, 0
    return sales.take(np.nonzero(keep)[0]), n_removed


def aggregate_monthly(sales: DailySalesTable) -> MonthlyTable:
    """Sum daily counts and average prices per (month, shop, item).

    Groups with a net-zero count (sales cancelled by returns) are kept: any
    transaction makes the group exist.
    """
    empty = lambda: MonthlyTable(*(np.empty(0, dtype=d) for d in
                                   (np.int64, np.int64, np.int64, np.float64, np.float64)))
    if len(sales) == 0:
        return empty()
    keys = _pack(sales.month_index, sales.shop_id, sales.item_id)
    order, uniq, starts, sizes = _group_reduce(keys)
    cnt = np.add.reduceat(sales.item_cnt_day[order], starts)
    price_sum = np.add.reduceat(sales.item_price[order], starts)
    return MonthlyTable(
        month=uniq >> 42,
        shop=(uniq >> 21) & ((1 << 21) - 1),
        item=uniq & ((1 << 21) - 1),
        cnt=cnt.astype(np.float64),
        avg_price=price_sum / sizes,
    )


def build_matrix(monthly: MonthlyTable, months) -> FeatureFrame:
    """Per-month Cartesian product of that month's active shops and items.

    A pair with no transactions that month still gets a row, with target 0.
    """
    months = sorted(int(m) for m in months)
    monthly_keys = _pack(monthly.month, monthly.shop, monthly.item)
    out_month, out_shop, out_item, out_target = [], [], [], []
    for m in months:
        in_m = monthly.month == m
        if not in_m.any():
            raise DataError(f"month {m} has no transactions; cannot build its matrix")
        shops = np.unique(monthly.shop[in_m])
        items = np.unique(monthly.item[in_m])
        grid_shop = np.repeat(shops, len(items))
        grid_item = np.tile(items, len(shops))
        grid_month = np.full(len(grid_shop), m, dtype=np.int64)
        target = _lookup(monthly_keys, monthly.cnt,
                         _pack(grid_month, grid_shop, grid_item), 0.0)
        out_month.append(grid_month)
        out_shop.append(grid_shop)
        out_item.append(grid_item)
        out_target.append(target)
    month = np.concatenate(out_month)
    return FeatureFrame(
        month=month,
        shop=np.concatenate(out_shop),
        item=np.concatenate(out_item),
        target=np.concatenate(out_target),
        row_id=np.full(len(month), -1, dtype=np.int64),
    )


def clip_target(frame: FeatureFrame, lo: float, hi: float) -> FeatureFrame:
    """Clamp every training target into [lo, hi] and record the interval."""
    if not lo < hi:
        raise ValueError(f"clip interval requires lo < hi, got ({lo}, {hi})")
    return frame.replace(target=np.clip(frame.target, lo, hi),
                         clip=(float(lo), float(hi)))


def append_test(frame: FeatureFrame, test: TestSet, catalog: Catalog) -> FeatureFrame:
    """Add one target-less row per test pair at the month after training."""
    if frame.features:
        raise DataError("append_test must run before feature columns are added")
    last_month = int(frame.month[frame.train_mask()].max())
    if test.target_month != last_month + 1:
        raise DataError(
            f"test target_month {test.target_month} does not follow the last "
            f"training month {last_month}")
    pairs = _pack2(test.shop_id, test.item_id)
    uniq, counts = np.unique(pairs, return_counts=True)
    if (counts > 1).any():
        key = int(uniq[counts > 1][0])
        raise DataError(
            f"duplicate test pair shop={key >> 21} item={key & ((1 << 21) - 1)}")
    for item in np.unique(test.item_id):
        catalog.category_of(int(item))
    n_new = len(test)
    return frame.replace(
        month=np.concatenate([frame.month,
                              np.full(n_new, test.target_month, dtype=np.int64)]),
        shop=np.concatenate([frame.shop, test.shop_id.astype(np.int64)]),
        item=np.concatenate([frame.item, test.item_id.astype(np.int64)]),
        target=np.concatenate([frame.target, np.full(n_new, np.nan)]),
        row_id=np.concatenate([frame.row_id, test.row_id.astype(np.int64)]),
    )


def _category_column(item_col: np.ndarray, catalog: Catalog) -> np.ndarray:
    if not catalog.items:
        raise DataError("catalog has no items; cannot derive categories")
    cat_items = np.array(sorted(catalog.items), dtype=np.int64)
    cat_vals = np.array([catalog.items[int(i)] for i in cat_items], dtype=np.int64)
    pos = np.searchsorted(cat_items, item_col)
    pos_c = np.minimum(pos, len(cat_items) - 1)
    missing = cat_items[pos_c] != item_col
    if missing.any():
        raise DataError(f"item {int(item_col[missing][0])} is not in the catalog")
    return cat_vals[pos_c]


def add_features(frame: FeatureFrame, monthly: MonthlyTable, catalog: Catalog,
                 recipe: FeatureRecipe) -> FeatureFrame:
    """Attach lag, group-mean, price, calendar and category columns.

    Lags read the frame's own (clipped) training targets: ``lag_L`` at
    (shop, item, m) is the target at (shop, item, m-L) when that row exists,
    else ``missing_lag_fill``.  Group means average the clipped target over
    the grouping's rows in the lagged month.
    """
    fill = float(recipe.missing_lag_fill)
    tm = frame.train_mask()
    src_keys = _pack(frame.month[tm], frame.shop[tm], frame.item[tm])
    src_order = np.argsort(src_keys, kind="stable")
    src_keys = src_keys[src_order]
    src_vals = frame.target[tm][src_order]

    features: dict = {}

    def pair_lag(lag: int) -> np.ndarray:
        query = _pack(frame.month - lag, frame.shop, frame.item)
        col = _lookup(src_keys, src_vals, query, fill)
        col[frame.month < lag] = fill
        return col

    for lag in recipe.target_lags:
        features[f"lag_{lag}"] = pair_lag(lag)

    cat_col = None
    for group, lag in recipe.group_mean_lags:
        if group == "item_shop":
            features[f"item_shop_mean_lag_{lag}"] = pair_lag(lag)
            continue
        if group == "item":
            gcol = frame.item
        elif group == "shop":
            gcol = frame.shop
        elif group == "category":
            if cat_col is None:
                cat_col = _category_column(frame.item, catalog)
            gcol = cat_col
        else:
            raise DataError(f"unknown grouping {group!r}; expected one of {GROUPINGS}")
        gkeys = _pack2(frame.month[tm], gcol[tm])
        order, uniq, starts, sizes = _group_reduce(gkeys)
        means = np.add.reduceat(frame.target[tm][order], starts) / sizes
        query = _pack2(frame.month - lag, gcol)
        col = _lookup(uniq, means, query, fill)
        col[frame.month < lag] = fill
        features[f"{group}_mean_lag_{lag}"] = col

    if recipe.include_price_lag1:
        mkeys = _pack(monthly.month, monthly.shop, monthly.item)
        col = _lookup(mkeys, monthly.avg_price,
                      _pack(frame.month - 1, frame.shop, frame.item), fill)
        col[frame.month < 1] = fill
        features["price_lag_1"] = col

    if recipe.include_month_of_year:
        features["month_of_year"] = (frame.month % 12).astype(np.float64)

    if recipe.include_category_id:
        if cat_col is None:
            cat_col = _category_column(frame.item, catalog)
        features["category_id"] = cat_col.astype(np.float64)

    return frame.replace(features=features, max_lag=recipe.max_lag,
                         recipe=recipe.to_dict())


def split_train_valid(frame: FeatureFrame, valid_month: int):
    """Time-ordered split: train on months [max_lag, valid_month), validate
    on valid_month.  Warm-up rows (months before the largest lag) are
    dropped so no training row has an all-fill lag block.
    """
    tm = frame.train_mask()
    train_months = np.unique(frame.month[tm])
    if valid_month not in train_months:
        raise DataError(f"validation month {valid_month} has no training rows")
    valid_idx = np.nonzero(tm & (frame.month == valid_month))[0]
    train_idx = np.nonzero(tm & (frame.month < valid_month)
                           & (frame.month >= frame.max_lag))[0]
    return frame.take(train_idx), frame.take(valid_idx)
