"""Benchmark the compiled kernel against the pure-numpy fallback.

Each backend runs in its own subprocess (backend selection happens at
import time), fits the same forest on the same synthetic frame, and
reports timings plus a checksum of its predictions.  The checksums must
match: the two backends are bit-identical by contract, so this is a pure
speed comparison.

    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --shops 20 --items 200 --months 24 \
        --trees 100 --threads 4
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def worker(args) -> dict:
    from salesforest.features import (FeatureRecipe, add_features,
                                      aggregate_monthly, build_matrix,
                                      clip_target, split_train_valid)
    from salesforest.forest import ForestParams, backend_name, fit_forest, predict
    from salesforest.synth import SynthConfig, generate_synthetic

    cfg = SynthConfig(n_shops=args.shops, n_items=args.items,
                      n_categories=max(2, args.shops // 2),
                      n_months=args.months, base_rate=3.0, noise_seed=7)
    sales, catalog, test, _ = generate_synthetic(cfg)
    monthly = aggregate_monthly(sales)
    frame = clip_target(build_matrix(monthly, range(cfg.n_months)), 0, 20)
    recipe = FeatureRecipe(target_lags=(1, 2, 3),
                           group_mean_lags=(("item", 1), ("shop", 1),
                                            ("category", 1)))
    frame = add_features(frame, monthly, catalog, recipe)
    train, valid = split_train_valid(frame, cfg.n_months - 1)

    params = ForestParams(n_trees=args.trees, max_depth=args.depth,
                          master_seed=13)
    started = time.perf_counter()
    model = fit_forest(train, params, threads=args.threads)
    fit_seconds = time.perf_counter() - started

    started = time.perf_counter()
    preds = predict(model, valid)
    predict_seconds = time.perf_counter() - started

    return {
        "backend": backend_name(),
        "rows": len(train),
        "features": len(train.feature_names),
        "nodes": int(sum(t.n_nodes for t in model.trees)),
        "fit_seconds": fit_seconds,
        "predict_seconds": predict_seconds,
        "checksum": hashlib.sha256(preds.tobytes()).hexdigest()[:16],
    }


def run_backend(force_fallback: bool, argv) -> dict:
    env = dict(os.environ)
    env.pop("SALESFOREST_FORCE_FALLBACK", None)
    if force_fallback:
        env["SALESFOREST_FORCE_FALLBACK"] = "1"
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker", *argv],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--shops", type=int, default=10)
    parser.add_argument("--items", type=int, default=80)
    parser.add_argument("--months", type=int, default=16)
    parser.add_argument("--trees", type=int, default=40)
    parser.add_argument("--depth", type=int, default=10)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args, _ = parser.parse_known_args()

    if args.worker:
        print(json.dumps(worker(args)))
        return 0

    argv = [f"--{name}={getattr(args, name)}"
            for name in ("shops", "items", "months", "trees", "depth",
                         "threads")]
    results = []
    for force_fallback in (False, True):
        result = run_backend(force_fallback, argv)
        results.append(result)
        print(f"{result['backend']:>9}: fit {result['fit_seconds']:7.2f}s   "
              f"predict {result['predict_seconds']:6.3f}s   "
              f"({result['rows']} rows, {result['nodes']} nodes, "
              f"checksum {result['checksum']})")

    a, b = results
    if a["checksum"] != b["checksum"]:
        print("ERROR: backends disagree; the parity contract is broken")
        return 1
    if a["backend"] == b["backend"]:
        print("note: compiled kernel not built; compared fallback with itself")
        return 0
    print(f"predictions bit-identical; compiled speedup: "
          f"{b['fit_seconds'] / a['fit_seconds']:.1f}x fit, "
          f"{b['predict_seconds'] / a['predict_seconds']:.1f}x predict")
    return 0


if __name__ == "__main__":
    sys.exit(main())
