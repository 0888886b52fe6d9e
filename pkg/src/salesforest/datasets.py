"""Domain tables and their CSV interfaces.

File schemas (comma-separated, UTF-8, header row mandatory; extra columns are
ignored so the public competition files load unchanged):

  sales      date,date_block_num,shop_id,item_id,item_price,item_cnt_day
             (date is day.month.year, e.g. ``02.01.2013``)
  items      item_id,item_category_id        (category_id also accepted)
  shops      shop_id
  categories item_category_id                (category_id also accepted)
  test       ID,shop_id,item_id
  truth      shop_id,item_id,item_cnt_month
  submission ID,item_cnt_month

Tables are immutable columnar holders; loaders report malformed rows by line
number and column name.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date as _date
from typing import Iterator, Mapping

import numpy as np

from .errors import DataError, InputError

# Joins pack (month, shop, item) into one int64; ids must stay below 2**21.
MAX_ID = (1 << 21) - 1


@dataclass(frozen=True)
class DailySaleRecord:
    """One transactional row: a sale (or return, negative count) on one day."""

    date: _date
    month_index: int
    shop_id: int
    item_id: int
    item_price: float
    item_cnt_day: float


@dataclass(frozen=True)
class DailySalesTable:
    """Columnar transactional data, one entry per raw row, order preserved."""

    dates: np.ndarray        # datetime64[D]
    month_index: np.ndarray  # int64
    shop_id: np.ndarray      # int64
    item_id: np.ndarray      # int64
    item_price: np.ndarray   # float64
    item_cnt_day: np.ndarray # float64

    def __post_init__(self):
        n = len(self.dates)
        for name in ("month_index", "shop_id", "item_id", "item_price", "item_cnt_day"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column {name} length differs from dates")
        if n == 0:
            return
        if self.month_index.min() < 0:
            raise DataError("month_index must be >= 0")
        for name in ("shop_id", "item_id"):
            col = getattr(self, name)
            if col.min() < 0 or col.max() > MAX_ID:
                raise DataError(f"{name} out of supported range [0, {MAX_ID}]")
        # one month_index per calendar month
        ym = self.dates.astype("datetime64[M]")
        pairs = np.unique(np.stack([ym.astype(np.int64), self.month_index]), axis=1)
        uniq, counts = np.unique(pairs[0], return_counts=True)
        if (counts > 1).any():
            bad = np.datetime64(int(uniq[counts > 1][0]), "M")
            raise DataError(
                "month_index is inconsistent with date: calendar month "
                f"{bad} maps to multiple month_index values"
            )

    def __len__(self) -> int:
        return len(self.dates)

    def row(self, i: int) -> DailySaleRecord:
        d = self.dates[i].astype(_date)
        return DailySaleRecord(
            date=d,
            month_index=int(self.month_index[i]),
            shop_id=int(self.shop_id[i]),
            item_id=int(self.item_id[i]),
            item_price=float(self.item_price[i]),
            item_cnt_day=float(self.item_cnt_day[i]),
        )

    def records(self) -> Iterator[DailySaleRecord]:
        return (self.row(i) for i in range(len(self)))

    @staticmethod
    def from_records(records) -> "DailySalesTable":
        records = list(records)
        return DailySalesTable(
            dates=np.array([r.date for r in records], dtype="datetime64[D]"),
            month_index=np.array([r.month_index for r in records], dtype=np.int64),
            shop_id=np.array([r.shop_id for r in records], dtype=np.int64),
            item_id=np.array([r.item_id for r in records], dtype=np.int64),
            item_price=np.array([r.item_price for r in records], dtype=np.float64),
            item_cnt_day=np.array([r.item_cnt_day for r in records], dtype=np.float64),
        )

    @staticmethod
    def empty() -> "DailySalesTable":
        return DailySalesTable(
            dates=np.empty(0, dtype="datetime64[D]"),
            month_index=np.empty(0, dtype=np.int64),
            shop_id=np.empty(0, dtype=np.int64),
            item_id=np.empty(0, dtype=np.int64),
            item_price=np.empty(0, dtype=np.float64),
            item_cnt_day=np.empty(0, dtype=np.float64),
        )

    def take(self, idx: np.ndarray) -> "DailySalesTable":
        return DailySalesTable(
            dates=self.dates[idx],
            month_index=self.month_index[idx],
            shop_id=self.shop_id[idx],
            item_id=self.item_id[idx],
            item_price=self.item_price[idx],
            item_cnt_day=self.item_cnt_day[idx],
        )


@dataclass(frozen=True)
class Catalog:
    """Item -> category map plus the known shop and category id sets."""

    items: Mapping[int, int]
    shops: frozenset
    categories: frozenset

    def __post_init__(self):
        for item, cat in self.items.items():
            if cat not in self.categories:
                raise DataError(f"item {item} references missing category {cat}")

    def category_of(self, item_id: int) -> int:
        try:
            return self.items[item_id]
        except KeyError:
            raise DataError(f"item {item_id} is not in the catalog") from None


@dataclass(frozen=True)
class TestSet:
    """Pairs to predict for the month after the last training month."""

    __test__ = False  # not a pytest class, despite the name

    row_id: np.ndarray   # int64
    shop_id: np.ndarray  # int64
    item_id: np.ndarray  # int64
    target_month: int

    def __post_init__(self):
        n = len(self.row_id)
        if len(self.shop_id) != n or len(self.item_id) != n:
            raise DataError("test set columns must share one length")
        if n and not np.array_equal(np.sort(self.row_id), np.arange(n)):
            raise DataError("test row_id values must be unique and contiguous from 0")

    def __len__(self) -> int:
        return len(self.row_id)


# ---------------------------------------------------------------------------
# CSV plumbing

def _open_reader(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None


def _header_map(header, required, path):
    """Column name -> position, failing loudly on missing columns."""
    positions = {}
    for name in required:
        aliases = (name,) if isinstance(name, str) else name
        for alias in aliases:
            if alias in header:
                positions[aliases[0]] = header.index(alias)
                break
        else:
            expected = ", ".join(a if isinstance(a, str) else a[0] for a in required)
            raise InputError(
                f"{path}: unknown header layout {header!r}; expected columns: {expected}"
            )
    return positions


def _parse_date(text: str) -> _date:
    parts = text.strip().split(".")
    if len(parts) != 3:
        raise ValueError("expected day.month.year")
    day, month, year = (int(p) for p in parts)
    return _date(year, month, day)


def _cell(parse, row, pos, column, path, lineno):
    try:
        return parse(row[pos])
    except (ValueError, IndexError) as exc:
        raise InputError(
            f"{path}:{lineno}: malformed value in column {column!r}: {exc}"
        ) from None


def load_sales_csv(path) -> DailySalesTable:
    """Read transactional rows; row order is preserved."""
    required = ["date", "date_block_num", "shop_id", "item_id", "item_price",
                "item_cnt_day"]
    dates, months, shops, items, prices, cnts = [], [], [], [], [], []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, header row is mandatory")
        pos = _header_map(header, required, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            dates.append(_cell(_parse_date, row, pos["date"], "date", path, lineno))
            months.append(_cell(int, row, pos["date_block_num"], "date_block_num", path, lineno))
            shops.append(_cell(int, row, pos["shop_id"], "shop_id", path, lineno))
            items.append(_cell(int, row, pos["item_id"], "item_id", path, lineno))
            prices.append(_cell(float, row, pos["item_price"], "item_price", path, lineno))
            cnts.append(_cell(float, row, pos["item_cnt_day"], "item_cnt_day", path, lineno))
    if not dates:
        return DailySalesTable.empty()
    return DailySalesTable(
        dates=np.array(dates, dtype="datetime64[D]"),
        month_index=np.array(months, dtype=np.int64),
        shop_id=np.array(shops, dtype=np.int64),
        item_id=np.array(items, dtype=np.int64),
        item_price=np.array(prices, dtype=np.float64),
        item_cnt_day=np.array(cnts, dtype=np.float64),
    )


def save_sales_csv(table: DailySalesTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "date_block_num", "shop_id", "item_id",
                         "item_price", "item_cnt_day"])
        days = table.dates.astype(_date)
        for i in range(len(table)):
            d = days[i]
            writer.writerow([
                f"{d.day:02d}.{d.month:02d}.{d.year:04d}",
                int(table.month_index[i]),
                int(table.shop_id[i]),
                int(table.item_id[i]),
                repr(float(table.item_price[i])),
                repr(float(table.item_cnt_day[i])),
            ])


def load_catalog(items_path, shops_path, categories_path) -> Catalog:
    """Assemble the Catalog, checking referential integrity."""
    categories = set()
    with _open_reader(categories_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{categories_path}: empty file, header row is mandatory")
        pos = _header_map(header, [("item_category_id", "category_id")], categories_path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            categories.add(_cell(int, row, pos["item_category_id"],
                                 "item_category_id", categories_path, lineno))

    shops = set()
    with _open_reader(shops_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{shops_path}: empty file, header row is mandatory")
        pos = _header_map(header, ["shop_id"], shops_path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            shops.add(_cell(int, row, pos["shop_id"], "shop_id", shops_path, lineno))

    items = {}
    with _open_reader(items_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{items_path}: empty file, header row is mandatory")
        pos = _header_map(header, ["item_id", ("item_category_id", "category_id")],
                          items_path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            item = _cell(int, row, pos["item_id"], "item_id", items_path, lineno)
            cat = _cell(int, row, pos["item_category_id"], "item_category_id",
                        items_path, lineno)
            if item in items:
                raise InputError(f"{items_path}:{lineno}: duplicate item_id {item}")
            if cat not in categories:
                raise InputError(
                    f"{items_path}:{lineno}: item {item} references missing category {cat}"
                )
            items[item] = cat

    return Catalog(items=items, shops=frozenset(shops), categories=frozenset(categories))


def save_catalog(catalog: Catalog, items_path, shops_path, categories_path) -> None:
    with open(categories_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_category_id"])
        for cat in sorted(catalog.categories):
            writer.writerow([cat])
    with open(shops_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shop_id"])
        for shop in sorted(catalog.shops):
            writer.writerow([shop])
    with open(items_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "item_category_id"])
        for item in sorted(catalog.items):
            writer.writerow([item, catalog.items[item]])


def load_test_csv(path, target_month: int) -> TestSet:
    row_ids, shops, items = [], [], []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, header row is mandatory")
        pos = _header_map(header, ["ID", "shop_id", "item_id"], path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row_ids.append(_cell(int, row, pos["ID"], "ID", path, lineno))
            shops.append(_cell(int, row, pos["shop_id"], "shop_id", path, lineno))
            items.append(_cell(int, row, pos["item_id"], "item_id", path, lineno))
    return TestSet(
        row_id=np.array(row_ids, dtype=np.int64),
        shop_id=np.array(shops, dtype=np.int64),
        item_id=np.array(items, dtype=np.int64),
        target_month=target_month,
    )


def save_test_csv(test: TestSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ID", "shop_id", "item_id"])
        for i in range(len(test)):
            writer.writerow([int(test.row_id[i]), int(test.shop_id[i]),
                             int(test.item_id[i])])


def load_truth_csv(path) -> dict:
    """(shop_id, item_id) -> realized target-month count."""
    truth = {}
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, header row is mandatory")
        pos = _header_map(header, ["shop_id", "item_id", "item_cnt_month"], path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            shop = _cell(int, row, pos["shop_id"], "shop_id", path, lineno)
            item = _cell(int, row, pos["item_id"], "item_id", path, lineno)
            cnt = _cell(float, row, pos["item_cnt_month"], "item_cnt_month", path, lineno)
            truth[(shop, item)] = cnt
    return truth


def save_truth_csv(truth: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shop_id", "item_id", "item_cnt_month"])
        for (shop, item) in sorted(truth):
            writer.writerow([shop, item, repr(float(truth[(shop, item)]))])


def write_submission(row_ids: np.ndarray, values: np.ndarray, path) -> None:
    """Submission CSV, one row per test row_id, ascending."""
    order = np.argsort(row_ids, kind="stable")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ID", "item_cnt_month"])
        for i in order:
            writer.writerow([int(row_ids[i]), repr(float(values[i]))])


def load_submission(path) -> tuple[np.ndarray, np.ndarray]:
    row_ids, values = [], []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, header row is mandatory")
        pos = _header_map(header, ["ID", "item_cnt_month"], path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row_ids.append(_cell(int, row, pos["ID"], "ID", path, lineno))
            values.append(_cell(float, row, pos["item_cnt_month"], "item_cnt_month",
                                path, lineno))
    return np.array(row_ids, dtype=np.int64), np.array(values, dtype=np.float64)
