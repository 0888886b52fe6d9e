"""Scoring: RMSE, R^2, naive baselines, and the comparison report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import _lookup, _pack
from .frame import FeatureFrame


def clip_values(values: np.ndarray, clip) -> np.ndarray:
    """Clamp into the interval; None passes values through unchanged."""
    if clip is None:
        return np.asarray(values, dtype=np.float64)
    lo, hi = clip
    return np.clip(np.asarray(values, dtype=np.float64), lo, hi)


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {actual.shape}")
    if pred.size < 1:
        raise ValueError("rmse needs at least one element")
    diff = pred - actual
    return float(np.sqrt(np.mean(diff * diff)))


def r_squared(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {actual.shape}")
    if pred.size < 2:
        raise ValueError("r_squared needs at least two elements")
    mean = actual.mean()
    sst = float(((actual - mean) ** 2).sum())
    if sst == 0.0:
        raise DataError("r_squared is undefined for a constant actual vector")
    sse = float(((actual - pred) ** 2).sum())
    return 1.0 - sse / sst


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    r_squared: float
    baselines: dict = field(default_factory=dict)
    n: int = 0
    clip: tuple | None = None

    def __post_init__(self):
        if self.rmse < 0:
            raise ValueError("rmse must be nonnegative")
        if self.n < 1:
            raise ValueError("report needs at least one scored row")

    def format_text(self) -> str:
        clip_txt = (f"[{self.clip[0]:g}, {self.clip[1]:g}]" if self.clip
                    else "none")
        lines = [
            f"rows           {self.n}",
            f"clip interval  {clip_txt}",
            f"rmse           {self.rmse:.6f}",
            f"r_squared      {self.r_squared:.6f}",
        ]
        for name in sorted(self.baselines):
            lines.append(f"baseline {name:<12} rmse {self.baselines[name]:.6f}")
        return "\n".join(lines)

    def csv_header(self) -> str:
        base_cols = "".join(f",baseline_{name}" for name in sorted(self.baselines))
        return "n,rmse,r_squared" + base_cols

    def csv_row(self) -> str:
        base_vals = "".join(f",{self.baselines[name]!r}"
                            for name in sorted(self.baselines))
        return f"{self.n},{self.rmse!r},{self.r_squared!r}" + base_vals


def baselines(train_frame: FeatureFrame, valid_frame: FeatureFrame) -> dict:
    """RMSE of two naive predictors on the validation rows.

    global_mean predicts the training-target mean everywhere; last_month
    predicts each pair's target at the previous month (0 when the pair has
    no row there).  Both are clipped like real predictions.
    """
    if not valid_frame.train_mask().all():
        raise DataError("validation frame must have targets on every row")
    clip = valid_frame.clip or train_frame.clip
    actual = valid_frame.target

    mean_pred = np.full(len(valid_frame), train_frame.target.mean())
    out = {"global_mean": rmse(clip_values(mean_pred, clip), actual)}

    train_keys = _pack(train_frame.month, train_frame.shop, train_frame.item)
    order = np.argsort(train_keys, kind="stable")
    query = _pack(valid_frame.month - 1, valid_frame.shop, valid_frame.item)
    last = _lookup(train_keys[order], train_frame.target[order], query, 0.0)
    out["last_month"] = rmse(clip_values(last, clip), actual)
    return out


def score_predictions(pred: np.ndarray, valid_frame: FeatureFrame, clip=None,
                      train_frame: FeatureFrame | None = None) -> MetricsReport:
    """Clip predictions, score them against the frame's targets, and attach
    baselines when a training frame is supplied."""
    if len(pred) != len(valid_frame):
        raise ValueError(
            f"length mismatch: {len(pred)} predictions vs {len(valid_frame)} rows")
    clip = clip if clip is not None else valid_frame.clip
    clipped = clip_values(pred, clip)
    actual = valid_frame.target
    if np.isnan(actual).any():
        raise DataError("validation frame must have targets on every row")
    report_baselines = (baselines(train_frame, valid_frame)
                        if train_frame is not None else {})
    return MetricsReport(
        rmse=rmse(clipped, actual),
        r_squared=r_squared(clipped, actual),
        baselines=report_baselines,
        n=len(valid_frame),
        clip=tuple(clip) if clip is not None else None,
    )
