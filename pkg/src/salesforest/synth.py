"""Seeded synthetic retail data for desk-scale runs and tests.

Counts are Poisson per (shop, item, day) with a log-linear monthly intensity

    lam(s, i, m) = base_rate * seasonal(i, m) * trend**m * affinity(s, i)

spread uniformly over the month's calendar days, so the realized monthly
total for a pair is Poisson with mean exactly ``lam``.  Affinities are
Gamma(2, 1/2) (mean 1), seasonality is a per-item-phase sinusoid
``1 + amplitude * sin(2*pi*(m % 12)/12 + phase_i)``.

The generator simulates one month past ``n_months``: sales for months
``0 .. n_months-1`` are returned, the extra month becomes the held-back truth
for the test pairs (all shop x item combinations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Catalog, DailySalesTable, TestSet

_START = np.datetime64("2013-01", "M")


@dataclass(frozen=True)
class SynthConfig:
    n_shops: int = 20
    n_items: int = 200
    n_categories: int = 10
    n_months: int = 24
    base_rate: float = 3.0
    seasonal_amplitude: float = 0.3
    trend: float = 1.01
    noise_seed: int = 0

    def __post_init__(self):
        for name in ("n_shops", "n_items", "n_categories"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_months < 14:
            raise ValueError("n_months must be >= 14 (12 lags plus a validation month)")
        if not 0.0 <= self.seasonal_amplitude <= 1.0:
            raise ValueError("seasonal_amplitude must be in [0, 1]")
        if self.base_rate <= 0 or self.trend <= 0:
            raise ValueError("base_rate and trend must be positive")


def generate_synthetic(cfg: SynthConfig):
    """Return (sales, catalog, test, truth); a pure function of cfg.

    truth maps (shop_id, item_id) to the realized total of the target month
    (``cfg.n_months``, one past the last shipped sales month).
    """
    rng = np.random.default_rng(cfg.noise_seed)
    n_s, n_i = cfg.n_shops, cfg.n_items

    item_cat = rng.integers(0, cfg.n_categories, size=n_i)
    affinity = rng.gamma(shape=2.0, scale=0.5, size=(n_s, n_i))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_i)
    base_price = np.round(rng.lognormal(mean=np.log(500.0), sigma=0.6, size=n_i), 2)

    months = np.arange(cfg.n_months + 1)
    month_starts = _START + months
    n_days = ((month_starts + 1).astype("datetime64[D]")
              - month_starts.astype("datetime64[D]")).astype(np.int64)

    dates, month_col, shop_col, item_col, price_col, cnt_col = [], [], [], [], [], []
    truth_counts = None

    for m in months:
        seasonal = 1.0 + cfg.seasonal_amplitude * np.sin(
            2.0 * np.pi * (m % 12) / 12.0 + phase)
        lam_month = cfg.base_rate * (cfg.trend ** m) * affinity * seasonal[None, :]
        d = int(n_days[m])
        counts = rng.poisson(lam_month[:, :, None] / d, size=(n_s, n_i, d))
        if m == cfg.n_months:
            truth_counts = counts.sum(axis=2)
            break
        shop_idx, item_idx, day_idx = np.nonzero(counts)
        if shop_idx.size:
            jitter = rng.uniform(0.95, 1.05, size=item_idx.size)
            dates.append(month_starts[m].astype("datetime64[D]") + day_idx)
            month_col.append(np.full(shop_idx.size, m, dtype=np.int64))
            shop_col.append(shop_idx.astype(np.int64))
            item_col.append(item_idx.astype(np.int64))
            price_col.append(np.round(base_price[item_idx] * jitter, 2))
            cnt_col.append(counts[shop_idx, item_idx, day_idx].astype(np.float64))

    if dates:
        sales = DailySalesTable(
            dates=np.concatenate(dates),
            month_index=np.concatenate(month_col),
            shop_id=np.concatenate(shop_col),
            item_id=np.concatenate(item_col),
            item_price=np.concatenate(price_col),
            item_cnt_day=np.concatenate(cnt_col),
        )
    else:
        sales = DailySalesTable.empty()

    catalog = Catalog(
        items={i: int(item_cat[i]) for i in range(n_i)},
        shops=frozenset(range(n_s)),
        categories=frozenset(range(cfg.n_categories)),
    )

    shop_grid = np.repeat(np.arange(n_s, dtype=np.int64), n_i)
    item_grid = np.tile(np.arange(n_i, dtype=np.int64), n_s)
    test = TestSet(
        row_id=np.arange(n_s * n_i, dtype=np.int64),
        shop_id=shop_grid,
        item_id=item_grid,
        target_month=cfg.n_months,
    )

    truth = {(int(s), int(i)): float(truth_counts[s, i])
             for s in range(n_s) for i in range(n_i)}
    return sales, catalog, test, truth
