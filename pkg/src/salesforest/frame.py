"""Columnar (month, shop, item) feature matrix.

A FeatureFrame holds key columns, an optional per-row target (NaN marks the
appended test rows, which carry a submission ``row_id`` instead), and named
float feature columns of equal length.  Frames are treated as immutable;
every transformation returns a new frame.

On disk a frame is one CSV plus a ``<name>.schema.json`` sidecar recording
column roles, the clip interval, the warm-up horizon and the feature recipe
that produced it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArtifactError, DataError, InputError

SCHEMA_VERSION = 1


@dataclass
class FeatureFrame:
    month: np.ndarray            # int64
    shop: np.ndarray             # int64
    item: np.ndarray             # int64
    target: np.ndarray           # float64, NaN where absent (test rows)
    row_id: np.ndarray           # int64, -1 for training rows
    features: dict = field(default_factory=dict)
    clip: tuple | None = None    # (lo, hi) applied to the target
    max_lag: int = 0             # warm-up horizon implied by the recipe
    recipe: dict | None = None   # recipe summary, for the sidecar

    def __post_init__(self):
        n = len(self.month)
        cols = {"shop": self.shop, "item": self.item, "target": self.target,
                "row_id": self.row_id, **self.features}
        for name, col in cols.items():
            if len(col) != n:
                raise DataError(f"column {name!r} length {len(col)} != {n}")
        if len(set(self.features)) != len(self.features):
            raise DataError("feature names must be unique")

    def __len__(self) -> int:
        return len(self.month)

    @property
    def feature_names(self) -> list:
        return list(self.features)

    def train_mask(self) -> np.ndarray:
        return ~np.isnan(self.target)

    def test_mask(self) -> np.ndarray:
        return np.isnan(self.target)

    def feature_matrix(self, names=None) -> np.ndarray:
        """Rows x features float64 matrix, columns in `names` order."""
        names = self.feature_names if names is None else list(names)
        missing = [n for n in names if n not in self.features]
        if missing:
            raise DataError(f"missing feature column {missing[0]!r}")
        if not names:
            return np.empty((len(self), 0), dtype=np.float64)
        return np.ascontiguousarray(np.column_stack([self.features[n] for n in names]))

    def take(self, idx) -> "FeatureFrame":
        return FeatureFrame(
            month=self.month[idx], shop=self.shop[idx], item=self.item[idx],
            target=self.target[idx], row_id=self.row_id[idx],
            features={k: v[idx] for k, v in self.features.items()},
            clip=self.clip, max_lag=self.max_lag, recipe=self.recipe,
        )

    def replace(self, **kwargs) -> "FeatureFrame":
        base = dict(month=self.month, shop=self.shop, item=self.item,
                    target=self.target, row_id=self.row_id,
                    features=self.features, clip=self.clip,
                    max_lag=self.max_lag, recipe=self.recipe)
        base.update(kwargs)
        return FeatureFrame(**base)


def save_frame(frame: FeatureFrame, csv_path) -> None:
    csv_path = str(csv_path)
    names = frame.feature_names
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month_index", "shop_id", "item_id", "row_id", "target",
                         *names])
        cols = [frame.features[n] for n in names]
        for i in range(len(frame)):
            t = frame.target[i]
            writer.writerow([
                int(frame.month[i]), int(frame.shop[i]), int(frame.item[i]),
                int(frame.row_id[i]),
                "" if math.isnan(t) else repr(float(t)),
                *(repr(float(c[i])) for c in cols),
            ])
    schema = {
        "format_version": SCHEMA_VERSION,
        "columns": (
            [{"name": n, "role": "key"} for n in ("month_index", "shop_id", "item_id")]
            + [{"name": "row_id", "role": "row_id"},
               {"name": "target", "role": "target"}]
            + [{"name": n, "role": "feature"} for n in names]
        ),
        "clip": list(frame.clip) if frame.clip else None,
        "max_lag": frame.max_lag,
        "recipe": frame.recipe,
    }
    with open(csv_path + ".schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_frame(csv_path) -> FeatureFrame:
    csv_path = str(csv_path)
    try:
        with open(csv_path + ".schema.json", encoding="utf-8") as fh:
            schema = json.load(fh)
    except OSError:
        raise ArtifactError(
            f"missing schema sidecar {csv_path}.schema.json "
            "(frames are written by the featurize command)") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{csv_path}.schema.json: invalid JSON: {exc}") from None
    version = schema.get("format_version")
    if version != SCHEMA_VERSION:
        from .errors import VersionError
        raise VersionError(version, SCHEMA_VERSION)
    feature_names = [c["name"] for c in schema["columns"] if c["role"] == "feature"]

    try:
        fh = open(csv_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {csv_path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["month_index", "shop_id", "item_id", "row_id", "target",
                    *feature_names]
        if header != expected:
            raise ArtifactError(
                f"{csv_path}: column header does not match the schema sidecar")
        rows = [row for row in reader if row]

    n = len(rows)
    month = np.empty(n, dtype=np.int64)
    shop = np.empty(n, dtype=np.int64)
    item = np.empty(n, dtype=np.int64)
    row_id = np.empty(n, dtype=np.int64)
    target = np.empty(n, dtype=np.float64)
    feats = {name: np.empty(n, dtype=np.float64) for name in feature_names}
    for i, row in enumerate(rows):
        try:
            month[i] = int(row[0]); shop[i] = int(row[1]); item[i] = int(row[2])
            row_id[i] = int(row[3])
            target[i] = float("nan") if row[4] == "" else float(row[4])
            for j, name in enumerate(feature_names):
                feats[name][i] = float(row[5 + j])
        except (ValueError, IndexError) as exc:
            raise InputError(f"{csv_path}:{i + 2}: malformed row: {exc}") from None

    clip = schema.get("clip")
    return FeatureFrame(
        month=month, shop=shop, item=item, target=target, row_id=row_id,
        features=feats, clip=tuple(clip) if clip else None,
        max_lag=int(schema.get("max_lag", 0)), recipe=schema.get("recipe"),
    )
