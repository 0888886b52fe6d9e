"""Command-line pipeline driver.

Subcommands: synth, featurize, train, tune, stack, predict, eval,
importance.  Every run is reproducible: all randomness flows from --seed
(or pinned seeds in the config file; flags win), outputs are byte-identical
across reruns and across --threads values, and failures exit nonzero with a
single machine-parsable ``error: <category>: <message>`` line.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config_file
from .datasets import (load_catalog, load_sales_csv, load_submission,
                       load_test_csv, load_truth_csv, save_catalog,
                       save_sales_csv, save_test_csv, save_truth_csv,
                       write_submission)
from .ensemble import EnsembleSpec, fit_mean_ensemble, fit_stacked
from .errors import ArtifactError, ConfigError, DataError, SalesForestError
from .features import (add_features, aggregate_monthly, append_test,
                       build_matrix, clip_target, remove_outliers,
                       split_train_valid)
from .forest import backend_name, feature_importance, fit_forest
from .frame import load_frame, save_frame
from .metrics import MetricsReport, baselines, clip_values, r_squared, rmse
from .model_io import (load_predictor, save_mean_ensemble, save_model,
                       save_stacked)
from .synth import generate_synthetic
from .tune import GRID_ORDER, grid_search

log = logging.getLogger("salesforest")


def _resolve_threads(args, cfg: RunConfig) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SALESFOREST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SALESFOREST_THREADS is not an integer: {env!r}")
    raw = cfg.raw.get("threads")
    if raw is not None:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _load_cfg(args) -> RunConfig:
    raw = load_config_file(args.config) if args.config else {}
    return RunConfig(raw=raw, seed_flag=args.seed)


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(cfg.path("out_dir", getattr(args, "out_dir", None), default="."))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}")
    return out


def _load_features(args, cfg: RunConfig):
    path = cfg.path("features", getattr(args, "features", None))
    try:
        return load_frame(path)
    except FileNotFoundError:
        raise ArtifactError(
            f"feature frame {path} not found; produce it with "
            "`salesforest featurize`") from None


def _training_region(frame):
    idx = np.nonzero(frame.train_mask() & (frame.month >= frame.max_lag))[0]
    if idx.size == 0:
        raise DataError("feature frame has no post-warm-up training rows")
    return frame.take(idx)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    synth_cfg = cfg.synth_config()
    sales, catalog, test, truth = generate_synthetic(synth_cfg)
    save_sales_csv(sales, out / "sales.csv")
    save_catalog(catalog, out / "items.csv", out / "shops.csv",
                 out / "categories.csv")
    save_test_csv(test, out / "test.csv")
    save_truth_csv(truth, out / "truth.csv")
    log.info("synth: %d sales rows over months 0..%d, %d test pairs -> %s",
             len(sales), synth_cfg.n_months - 1, len(test), out)
    return 0


def cmd_featurize(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    lo, hi = cfg.clip()

    sales = load_sales_csv(cfg.path("sales", args.sales))
    log.info("featurize: loaded %d sales rows", len(sales))
    catalog = load_catalog(cfg.path("items", args.items),
                           cfg.path("shops", args.shops),
                           cfg.path("categories", args.categories))
    log.info("featurize: catalog has %d items, %d shops, %d categories",
             len(catalog.items), len(catalog.shops), len(catalog.categories))

    sales, removed = remove_outliers(sales, cfg.outlier_policy())
    log.info("featurize: outlier removal dropped %d rows (%d remain)",
             removed, len(sales))
    monthly = aggregate_monthly(sales)
    log.info("featurize: %d monthly (month, shop, item) groups", len(monthly))
    if len(monthly) == 0:
        raise DataError("no transactions left after outlier removal")
    months = range(int(monthly.month.min()), int(monthly.month.max()) + 1)
    frame = build_matrix(monthly, months)
    log.info("featurize: matrix has %d rows over months %d..%d",
             len(frame), months.start, months.stop - 1)
    frame = clip_target(frame, lo, hi)
    log.info("featurize: targets clipped to [%g, %g]", lo, hi)

    test_path = cfg.path("test", args.test, default="") or None
    if test_path:
        target_month = int(frame.month.max()) + 1
        test = load_test_csv(test_path, target_month=target_month)
        frame = append_test(frame, test, catalog)
        log.info("featurize: appended %d test rows at month %d",
                 len(test), target_month)

    frame = add_features(frame, monthly, catalog, cfg.recipe())
    log.info("featurize: added %d feature columns (warm-up %d months)",
             len(frame.feature_names), frame.max_lag)

    out_path = out / (args.out or "features.csv")
    save_frame(frame, out_path)
    log.info("featurize: wrote %s (+ schema sidecar)", out_path)
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    threads = _resolve_threads(args, cfg)
    frame = _load_features(args, cfg)
    region = _training_region(frame)
    params = cfg.forest_params()
    k, ensemble_seed = cfg.ensemble_spec()
    if args.members is not None:
        k = args.members
    elif "ensemble" not in cfg.raw:
        k = 1  # a bare `train` fits a single forest

    started = time.perf_counter()
    if k <= 1:
        model = fit_forest(region, params, threads=threads)
        path = out / "model.sfm"
        save_model(model, path)
        log.info("train: %d trees on %d rows in %.2fs (%s backend) -> %s",
                 params.n_trees, len(region), time.perf_counter() - started,
                 backend_name(), path)
    else:
        spec = EnsembleSpec(k=k, seed=ensemble_seed, params=params)
        members = fit_mean_ensemble(region, spec, threads=threads)
        path = save_mean_ensemble(members, spec.member_seeds(), out)
        log.info("train: %d-member ensemble (%d trees each) on %d rows "
                 "in %.2fs (%s backend) -> %s",
                 k, params.n_trees, len(region), time.perf_counter() - started,
                 backend_name(), path)
    return 0


def cmd_tune(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    threads = _resolve_threads(args, cfg)
    frame = _load_features(args, cfg)
    grid = cfg.grid_spec(valid_month_flag=args.valid_month)

    result = grid_search(frame, grid, threads=threads)
    csv_path = out / "grid_results.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(GRID_ORDER) + ",rmse\n")
        for row in result.rows:
            fh.write(",".join(repr(row.params[k]) if isinstance(row.params[k], float)
                              else str(row.params[k]) for k in GRID_ORDER))
            fh.write(f",{row.rmse!r}\n")
    log.info("tune: %d combinations -> %s", len(result.rows), csv_path)
    print(f"combinations evaluated: {len(result.rows)}")
    for row in result.rows:
        mark = " *" if row.params == result.best_params else ""
        print(f"  {row.params}  rmse={row.rmse:.6f}  "
              f"fit={row.fit_seconds:.2f}s{mark}")
    print(f"best: {result.best_params} rmse={result.best_rmse:.6f}")
    return 0


def cmd_stack(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    threads = _resolve_threads(args, cfg)
    frame = _load_features(args, cfg)
    folds, bases = cfg.stack_spec()
    valid_month = cfg.valid_month(args.valid_month)

    model = fit_stacked(frame, bases, folds=folds, valid_month=valid_month,
                        threads=threads)
    path = save_stacked(model, out)
    weights = ", ".join(f"{w:.4f}" for w in model.weights)
    log.info("stack: %d bases, %d folds, weights [%s], intercept %.4f -> %s",
             len(bases), folds, weights, model.intercept, path)
    return 0


def _find_model(args, cfg: RunConfig, out: Path) -> str:
    if getattr(args, "model", None):
        return args.model
    configured = cfg._section("paths").get("model")
    if configured:
        return configured
    for name in ("model.sfm", "ensemble.json", "stack.json"):
        if (out / name).exists():
            return str(out / name)
    raise ArtifactError(
        f"no model artifact in {out} (expected model.sfm, ensemble.json or "
        "stack.json; produce one with `salesforest train` or `salesforest stack`)")


def cmd_predict(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    frame = _load_features(args, cfg)
    predictor = load_predictor(_find_model(args, cfg, out))

    test_idx = np.nonzero(frame.row_id >= 0)[0]
    if test_idx.size == 0:
        raise DataError("feature frame has no test rows; featurize with a test file")
    test_frame = frame.take(test_idx)
    preds = clip_values(predictor.predict(test_frame), frame.clip or cfg.clip())
    path = out / (args.out or "submission.csv")
    write_submission(test_frame.row_id, preds, path)
    log.info("predict: wrote %d rows -> %s", len(test_frame), path)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    clip = cfg.clip()
    row_ids, preds = load_submission(cfg.path("submission", args.submission))
    truth = load_truth_csv(cfg.path("truth", args.truth))
    test = load_test_csv(cfg.path("test", args.test), target_month=0)
    pair_of_id = {int(test.row_id[i]): (int(test.shop_id[i]), int(test.item_id[i]))
                  for i in range(len(test))}
    actual = np.empty(len(row_ids), dtype=np.float64)
    for i, row_id in enumerate(row_ids):
        pair = pair_of_id.get(int(row_id))
        if pair is None:
            raise DataError(f"submission ID {int(row_id)} is not in the test set")
        if pair not in truth:
            raise DataError(f"truth file lacks shop={pair[0]} item={pair[1]}")
        actual[i] = truth[pair]

    preds_c = clip_values(preds, clip)
    actual_c = clip_values(actual, clip)
    base = {}
    if args.features:
        frame = load_frame(args.features)
        train_frame = _training_region(frame)
        test_idx = np.nonzero(frame.row_id >= 0)[0]
        pos_of_id = {int(r): k for k, r in enumerate(row_ids)}
        frame_ids = frame.row_id[test_idx]
        if test_idx.size and set(pos_of_id) == {int(r) for r in frame_ids}:
            valid_frame = frame.take(test_idx).replace(
                target=np.array([actual_c[pos_of_id[int(r)]]
                                 for r in frame_ids]))
            base = baselines(train_frame, valid_frame)
        else:
            log.warning("eval: submission and feature-frame test rows do not "
                        "line up; skipping baselines")
    report = MetricsReport(rmse=rmse(preds_c, actual_c),
                           r_squared=r_squared(preds_c, actual_c),
                           baselines=base, n=len(row_ids), clip=clip)
    print(report.format_text())
    if args.report_csv:
        with open(args.report_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.csv_header() + "\n" + report.csv_row() + "\n")
    return 0


def cmd_importance(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    predictor = load_predictor(_find_model(args, cfg, out))
    if hasattr(predictor, "members"):
        raw = np.zeros(len(predictor.members[0].feature_names))
        names = predictor.members[0].feature_names
        for member in predictor.members:
            raw += member.importance_raw
        total = raw.sum()
        weights = {n: (float(w / total) if total > 0 else 0.0)
                   for n, w in zip(names, raw)}
    elif hasattr(predictor, "importance_raw"):
        weights = feature_importance(predictor)
    else:
        raise ArtifactError("importance needs a forest or mean-ensemble artifact")
    for name, weight in sorted(weights.items(), key=lambda kv: -kv[1]):
        print(f"{weight:.6f}  {name}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salesforest",
        description="Monthly sales forecasting pipeline (featurize, train, "
                    "tune, stack, predict, evaluate).")
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags win)")
    common.add_argument("--seed", type=int, default=None,
                        help="root seed controlling all randomness")
    common.add_argument("--threads", type=int, default=None,
                        help="worker thread cap (results never depend on it); "
                             "env SALESFOREST_THREADS applies when absent")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--out-dir", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="write a seeded synthetic dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", parents=[common],
                       help="raw CSVs -> feature frame")
    p.add_argument("--sales"), p.add_argument("--items")
    p.add_argument("--shops"), p.add_argument("--categories")
    p.add_argument("--test")
    p.add_argument("--out", help="frame file name (default features.csv)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common],
                       help="fit a forest or a seed-averaged ensemble")
    p.add_argument("--features")
    p.add_argument("--members", type=int, default=None,
                   help="ensemble size (1 = single forest)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", parents=[common], help="exhaustive grid search")
    p.add_argument("--features")
    p.add_argument("--valid-month", type=int, default=None)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("stack", parents=[common],
                       help="out-of-fold stacking over base forests")
    p.add_argument("--features")
    p.add_argument("--valid-month", type=int, default=None)
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("predict", parents=[common],
                       help="write the clipped submission CSV")
    p.add_argument("--features")
    p.add_argument("--model", help=".sfm model or ensemble/stack manifest")
    p.add_argument("--out", help="submission file name (default submission.csv)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common],
                       help="score a submission against a truth file")
    p.add_argument("--submission"), p.add_argument("--truth")
    p.add_argument("--test"), p.add_argument("--features")
    p.add_argument("--report-csv", help="also write a single-row CSV report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("importance", parents=[common],
                       help="print the normalized feature ranking")
    p.add_argument("--model")
    p.set_defaults(func=cmd_importance)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", force=True)
    try:
        return args.func(args)
    except SalesForestError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        if args.verbose:
            raise
        print(f"error: internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
