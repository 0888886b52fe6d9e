import numpy as np
import pytest

from salesforest.datasets import (Catalog, TestSet, load_catalog,
                                  load_sales_csv, load_submission,
                                  load_test_csv, load_truth_csv, save_sales_csv,
                                  save_test_csv, save_truth_csv,
                                  write_submission)
from salesforest.errors import DataError, InputError

from conftest import make_sales

SALES_HEADER = "date,date_block_num,shop_id,item_id,item_price,item_cnt_day\n"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadSales:
    def test_field_mapping(self, tmp_path):
        path = write(tmp_path, "s.csv",
                     SALES_HEADER + "02.01.2013,0,59,22154,999.00,1.0\n")
        table = load_sales_csv(path)
        assert len(table) == 1
        rec = table.row(0)
        assert rec.month_index == 0
        assert rec.shop_id == 59
        assert rec.item_id == 22154
        assert rec.item_price == 999.0
        assert rec.item_cnt_day == 1.0
        assert rec.date.isoformat() == "2013-01-02"

    def test_header_only_is_empty_table(self, tmp_path):
        table = load_sales_csv(write(tmp_path, "s.csv", SALES_HEADER))
        assert len(table) == 0

    def test_returns_are_accepted(self, tmp_path):
        path = write(tmp_path, "s.csv",
                     SALES_HEADER + "05.03.2013,2,1,2,10.0,-1.0\n")
        table = load_sales_csv(path)
        assert table.row(0).item_cnt_day == -1.0

    def test_malformed_row_names_line_and_column(self, tmp_path):
        path = write(tmp_path, "s.csv",
                     SALES_HEADER
                     + "02.01.2013,0,59,22154,999.00,1.0\n"
                     + "03.01.2013,0,59,oops,999.00,1.0\n")
        with pytest.raises(InputError, match=r":3.*item_id"):
            load_sales_csv(path)

    def test_bad_date_names_column(self, tmp_path):
        path = write(tmp_path, "s.csv", SALES_HEADER + "2013-01-02,0,1,1,9.0,1\n")
        with pytest.raises(InputError, match="date"):
            load_sales_csv(path)

    def test_unknown_header_lists_expected_columns(self, tmp_path):
        path = write(tmp_path, "s.csv", "a,b,c\n1,2,3\n")
        with pytest.raises(InputError, match="item_cnt_day"):
            load_sales_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_sales_csv(tmp_path / "nope.csv")

    def test_column_order_free(self, tmp_path):
        path = write(tmp_path, "s.csv",
                     "item_cnt_day,shop_id,date,item_id,item_price,date_block_num\n"
                     "2.0,7,15.02.2013,33,5.5,1\n")
        rec = load_sales_csv(path).row(0)
        assert (rec.shop_id, rec.item_id, rec.item_cnt_day) == (7, 33, 2.0)


class TestSalesTable:
    def test_month_date_consistency_enforced(self):
        with pytest.raises(DataError, match="month_index"):
            make_sales([("2013-01-02", 0, 1, 1, 9.0, 1.0),
                        ("2013-01-20", 1, 1, 1, 9.0, 1.0)])

    def test_negative_ids_rejected(self):
        with pytest.raises(DataError):
            make_sales([("2013-01-02", 0, -1, 1, 9.0, 1.0)])

    def test_round_trip_preserves_fields(self, tmp_path):
        table = make_sales([("2013-01-02", 0, 5, 7, 99.5, 2.0),
                            ("2013-02-28", 1, 5, 7, 98.25, -1.0),
                            ("2013-02-01", 1, 2, 9, 0.07, 3.0)])
        save_sales_csv(table, tmp_path / "s.csv")
        back = load_sales_csv(tmp_path / "s.csv")
        assert np.array_equal(back.dates, table.dates)
        assert np.array_equal(back.month_index, table.month_index)
        assert np.array_equal(back.shop_id, table.shop_id)
        assert np.array_equal(back.item_id, table.item_id)
        assert np.array_equal(back.item_price, table.item_price)
        assert np.array_equal(back.item_cnt_day, table.item_cnt_day)

    def test_records_iteration(self):
        table = make_sales([("2013-01-02", 0, 5, 7, 99.5, 2.0)])
        recs = list(table.records())
        assert len(recs) == 1 and recs[0].shop_id == 5


class TestCatalog:
    def write_catalog(self, tmp_path, items, shops, cats):
        return (write(tmp_path, "items.csv", items),
                write(tmp_path, "shops.csv", shops),
                write(tmp_path, "categories.csv", cats))

    def test_three_items_two_categories(self, tmp_path):
        paths = self.write_catalog(
            tmp_path,
            "item_id,item_category_id\n1,10\n2,10\n3,11\n",
            "shop_id\n0\n1\n",
            "item_category_id\n10\n11\n")
        catalog = load_catalog(*paths)
        assert len(catalog.items) == 3
        assert catalog.categories == frozenset({10, 11})
        assert catalog.category_of(2) == 10

    def test_duplicate_item_rejected(self, tmp_path):
        paths = self.write_catalog(
            tmp_path,
            "item_id,item_category_id\n1,10\n1,11\n",
            "shop_id\n0\n",
            "item_category_id\n10\n11\n")
        with pytest.raises(InputError, match="duplicate item_id 1"):
            load_catalog(*paths)

    def test_empty_items_file_is_valid(self, tmp_path):
        paths = self.write_catalog(tmp_path, "item_id,item_category_id\n",
                                   "shop_id\n0\n", "item_category_id\n10\n")
        catalog = load_catalog(*paths)
        assert catalog.items == {}

    def test_missing_category_names_item(self, tmp_path):
        paths = self.write_catalog(
            tmp_path,
            "item_id,item_category_id\n7,99\n",
            "shop_id\n0\n",
            "item_category_id\n10\n")
        with pytest.raises(InputError, match="item 7"):
            load_catalog(*paths)

    def test_catalog_type_checks_referential_integrity(self):
        with pytest.raises(DataError, match="missing category"):
            Catalog(items={1: 5}, shops=frozenset({0}), categories=frozenset({4}))

    def test_competition_style_extra_columns(self, tmp_path):
        paths = self.write_catalog(
            tmp_path,
            'item_name,item_id,item_category_id\n"a, quoted",1,10\n',
            "shop_name,shop_id\nfoo,0\n",
            "item_category_name,item_category_id\nbar,10\n")
        catalog = load_catalog(*paths)
        assert catalog.items == {1: 10}


class TestTestSetAndTruth:
    def test_row_ids_must_be_contiguous(self):
        with pytest.raises(DataError, match="contiguous"):
            TestSet(row_id=np.array([0, 2]), shop_id=np.array([1, 1]),
                    item_id=np.array([1, 2]), target_month=5)

    def test_test_round_trip(self, tmp_path):
        test = TestSet(row_id=np.arange(3), shop_id=np.array([1, 1, 2]),
                       item_id=np.array([5, 6, 5]), target_month=12)
        save_test_csv(test, tmp_path / "t.csv")
        back = load_test_csv(tmp_path / "t.csv", target_month=12)
        assert np.array_equal(back.shop_id, test.shop_id)
        assert np.array_equal(back.item_id, test.item_id)

    def test_truth_round_trip(self, tmp_path):
        truth = {(1, 5): 3.0, (2, 9): 0.0}
        save_truth_csv(truth, tmp_path / "tr.csv")
        assert load_truth_csv(tmp_path / "tr.csv") == truth

    def test_submission_round_trip_sorted(self, tmp_path):
        write_submission(np.array([2, 0, 1]), np.array([1.5, 0.25, 20.0]),
                         tmp_path / "sub.csv")
        text = (tmp_path / "sub.csv").read_text()
        assert text.splitlines()[0] == "ID,item_cnt_month"
        ids, values = load_submission(tmp_path / "sub.csv")
        assert ids.tolist() == [0, 1, 2]
        assert values.tolist() == [0.25, 20.0, 1.5]
