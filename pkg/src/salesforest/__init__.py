"""Monthly shop/item sales forecasting toolkit.

Pipeline: transactional CSVs -> monthly shop x item feature matrix with lag
features -> from-scratch random-forest regression -> seed-averaged ensembles
or out-of-fold stacking -> clipped RMSE evaluation, plus a time-aware grid
search.  Tree training runs on a compiled kernel when available, with a
bit-identical pure-numpy fallback.
"""

from .datasets import (Catalog, DailySaleRecord, DailySalesTable, TestSet,
                       load_catalog, load_sales_csv)
from .ensemble import (EnsembleSpec, StackedModel, fit_mean_ensemble,
                       fit_stacked, predict_mean_ensemble, predict_stacked)
from .features import (FeatureRecipe, MonthlyTable, OutlierPolicy,
                       add_features, aggregate_monthly, append_test,
                       build_matrix, clip_target, remove_outliers,
                       split_train_valid)
from .forest import (ForestModel, ForestParams, RegressionTree, backend_name,
                     feature_importance, fit_forest, fit_tree, predict)
from .frame import FeatureFrame, load_frame, save_frame
from .metrics import MetricsReport, baselines, r_squared, rmse, score_predictions
from .model_io import load_model, save_model
from .synth import SynthConfig, generate_synthetic
from .tune import GridResult, GridSpec, grid_search

__version__ = "0.1.0"
