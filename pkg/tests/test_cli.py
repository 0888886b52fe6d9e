import json
import os
from argparse import Namespace
from pathlib import Path

import numpy as np
import pytest

from salesforest.cli import _resolve_threads, main
from salesforest.config import RunConfig
from salesforest.datasets import load_submission, load_test_csv, load_truth_csv
from salesforest.errors import ConfigError

CONFIG = {
    "synth": {"n_shops": 5, "n_items": 25, "n_categories": 4, "n_months": 15,
              "base_rate": 3.0},
    "recipe": {"target_lags": [1, 2], "group_mean_lags": [["item", 1]]},
    "forest": {"n_trees": 8, "max_depth": 6},
    "grid": {"n_trees": [4], "max_depth": [2, 4], "min_samples_leaf": [1, 2],
             "max_features": [1.0]},
    "stack": {"folds": 3,
              "bases": [{"n_trees": 4, "max_depth": 4},
                        {"n_trees": 4, "max_depth": 6}]},
    "valid_month": 14,
}


def write_config(directory: Path, out_dir: Path) -> Path:
    cfg = dict(CONFIG)
    out = str(out_dir)
    cfg["paths"] = {
        "out_dir": out,
        "sales": f"{out}/sales.csv", "items": f"{out}/items.csv",
        "shops": f"{out}/shops.csv", "categories": f"{out}/categories.csv",
        "test": f"{out}/test.csv", "truth": f"{out}/truth.csv",
        "features": f"{out}/features.csv",
        "submission": f"{out}/submission.csv",
    }
    path = directory / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


def run(*argv) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> featurize -> train -> predict, once per module."""
    root = tmp_path_factory.mktemp("cli")
    out = root / "out"
    cfg = write_config(root, out)
    for cmd in (["synth"], ["featurize"], ["train"], ["predict"]):
        assert run(*cmd, "--config", str(cfg), "--seed", "3") == 0
    return cfg, out


class TestPipelineArtifacts:
    def test_synth_is_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            cfg = write_config(tmp_path, tmp_path / sub)
            (tmp_path / sub).mkdir(exist_ok=True)
            assert run("synth", "--config", str(cfg), "--seed", "5") == 0
        for name in ("sales.csv", "items.csv", "shops.csv", "categories.csv",
                     "test.csv", "truth.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes(), name

    def test_featurize_rerun_is_byte_identical(self, pipeline, tmp_path):
        cfg, out = pipeline
        before = (out / "features.csv").read_bytes()
        assert run("featurize", "--config", str(cfg), "--seed", "3") == 0
        assert (out / "features.csv").read_bytes() == before

    def test_featurize_stage_log_is_monotone(self, pipeline, capsys):
        import re
        cfg, out = pipeline
        assert run("featurize", "--config", str(cfg), "--seed", "3") == 0
        err = capsys.readouterr().err
        loaded = int(re.search(r"loaded (\d+) sales rows", err).group(1))
        dropped = int(re.search(r"dropped (\d+) rows", err).group(1))
        remain = int(re.search(r"\((\d+) remain\)", err).group(1))
        assert 0 <= dropped <= loaded
        assert remain == loaded - dropped

    def test_submission_format(self, pipeline):
        cfg, out = pipeline
        lines = (out / "submission.csv").read_text().splitlines()
        assert lines[0] == "ID,item_cnt_month"
        ids, values = load_submission(out / "submission.csv")
        assert ids.tolist() == list(range(len(ids)))
        test = load_test_csv(out / "test.csv", target_month=15)
        assert len(ids) == len(test)
        assert (values >= 0).all() and (values <= 20).all()

    def test_predict_rerun_is_byte_identical(self, pipeline):
        cfg, out = pipeline
        before = (out / "submission.csv").read_bytes()
        assert run("predict", "--config", str(cfg), "--seed", "3") == 0
        assert (out / "submission.csv").read_bytes() == before

    def test_eval_of_truth_copy_scores_zero(self, pipeline, tmp_path, capsys):
        cfg, out = pipeline
        truth = load_truth_csv(out / "truth.csv")
        test = load_test_csv(out / "test.csv", target_month=15)
        values = np.array([truth[(int(s), int(i))] for s, i in
                           zip(test.shop_id, test.item_id)])
        from salesforest.datasets import write_submission
        sub = tmp_path / "perfect.csv"
        write_submission(test.row_id, np.clip(values, 0, 20), sub)
        assert run("eval", "--config", str(cfg), "--submission", str(sub)) == 0
        text = capsys.readouterr().out
        assert "rmse           0.000000" in text

    def test_eval_with_baselines_and_report(self, pipeline, tmp_path, capsys):
        cfg, out = pipeline
        report = tmp_path / "report.csv"
        assert run("eval", "--config", str(cfg),
                   "--features", str(out / "features.csv"),
                   "--report-csv", str(report)) == 0
        text = capsys.readouterr().out
        assert "baseline global_mean" in text
        header, row = report.read_text().splitlines()
        assert header.startswith("n,rmse,r_squared")

    def test_importance_prints_normalized_ranking(self, pipeline, capsys):
        cfg, out = pipeline
        assert run("importance", "--config", str(cfg)) == 0
        lines = capsys.readouterr().out.splitlines()
        weights = [float(line.split()[0]) for line in lines]
        assert weights == sorted(weights, reverse=True)
        assert sum(weights) == pytest.approx(1.0, abs=1e-6)
        assert any("lag_1" in line for line in lines)

    def test_tune_writes_exhaustive_deterministic_csv(self, pipeline):
        cfg, out = pipeline
        assert run("tune", "--config", str(cfg), "--seed", "3") == 0
        first = (out / "grid_results.csv").read_bytes()
        rows = first.decode().splitlines()
        assert rows[0] == ("n_trees,max_depth,min_samples_split,"
                           "min_samples_leaf,max_features,rmse")
        assert len(rows) == 1 + 4  # 1x2x1x2x1 combinations
        assert run("tune", "--config", str(cfg), "--seed", "3") == 0
        assert (out / "grid_results.csv").read_bytes() == first

    def test_stack_then_predict(self, pipeline, tmp_path):
        cfg, out = pipeline
        assert run("stack", "--config", str(cfg), "--seed", "3") == 0
        manifest = json.loads((out / "stack.json").read_text())
        assert manifest["kind"] == "stacked"
        assert len(manifest["weights"]) == 2
        assert run("predict", "--config", str(cfg), "--seed", "3",
                   "--model", str(out / "stack.json"), "--out",
                   "sub_stack.csv") == 0
        ids, values = load_submission(out / "sub_stack.csv")
        assert (values >= 0).all() and (values <= 20).all()

    def test_train_members_writes_manifest(self, pipeline, tmp_path):
        cfg, out = pipeline
        assert run("train", "--config", str(cfg), "--seed", "3",
                   "--members", "3", "--out-dir", str(tmp_path)) == 0
        manifest = json.loads((tmp_path / "ensemble.json").read_text())
        assert manifest["k"] == 3
        assert len(manifest["member_seeds"]) == 3
        for f in manifest["members"]:
            assert (tmp_path / f).exists()


class TestSeedsAndErrors:
    def test_seed_flag_overrides_pinned_seeds(self, pipeline, tmp_path):
        cfg_path, out = pipeline
        raw = json.loads(cfg_path.read_text())
        raw["forest"]["master_seed"] = 12345
        pinned = tmp_path / "pinned.json"
        pinned.write_text(json.dumps(raw))

        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        assert run("train", "--config", str(pinned), "--out-dir", str(a)) == 0
        assert run("train", "--config", str(pinned), "--seed", "9",
                   "--out-dir", str(b)) == 0
        raw["forest"].pop("master_seed")
        unpinned = tmp_path / "unpinned.json"
        unpinned.write_text(json.dumps(raw))
        assert run("train", "--config", str(unpinned), "--seed", "9",
                   "--out-dir", str(c)) == 0

        bytes_a = (a / "model.sfm").read_bytes()
        bytes_b = (b / "model.sfm").read_bytes()
        bytes_c = (c / "model.sfm").read_bytes()
        assert bytes_b == bytes_c  # flag wins over the pin
        assert bytes_a != bytes_b  # and changes the model

    def test_missing_model_is_single_line_artifact_error(self, pipeline,
                                                         tmp_path, capsys):
        cfg, out = pipeline
        rc = run("predict", "--config", str(cfg), "--out-dir",
                 str(tmp_path / "empty"), "--features",
                 str(out / "features.csv"))
        assert rc == 1
        err = [l for l in capsys.readouterr().err.splitlines()
               if l.startswith("error:")]
        assert len(err) == 1
        assert err[0].startswith("error: artifact:")
        assert "train" in err[0]  # names the producing command

    def test_malformed_config_is_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        rc = run("synth", "--config", str(bad), "--out-dir", str(tmp_path))
        assert rc == 1
        assert capsys.readouterr().err.splitlines()[-1].startswith(
            "error: config:")

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        rc = run("featurize", "--sales", str(tmp_path / "no.csv"),
                 "--items", "x", "--shops", "y", "--categories", "z",
                 "--out-dir", str(tmp_path))
        assert rc == 1
        assert capsys.readouterr().err.splitlines()[-1].startswith("error: io:")

    def test_unknown_command_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestThreadResolution:
    def args(self, threads=None):
        return Namespace(threads=threads)

    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv("SALESFOREST_THREADS", "7")
        cfg = RunConfig(raw={"threads": 3})
        assert _resolve_threads(self.args(threads=2), cfg) == 2

    def test_env_when_flag_absent(self, monkeypatch):
        monkeypatch.setenv("SALESFOREST_THREADS", "7")
        cfg = RunConfig(raw={"threads": 3})
        assert _resolve_threads(self.args(), cfg) == 7

    def test_config_when_no_flag_no_env(self, monkeypatch):
        monkeypatch.delenv("SALESFOREST_THREADS", raising=False)
        cfg = RunConfig(raw={"threads": 3})
        assert _resolve_threads(self.args(), cfg) == 3

    def test_default_is_cpu_count(self, monkeypatch):
        monkeypatch.delenv("SALESFOREST_THREADS", raising=False)
        assert _resolve_threads(self.args(), RunConfig(raw={})) == \
            (os.cpu_count() or 1)

    def test_bad_env_is_config_error(self, monkeypatch):
        monkeypatch.setenv("SALESFOREST_THREADS", "lots")
        with pytest.raises(ConfigError):
            _resolve_threads(self.args(), RunConfig(raw={}))
