"""Gradient-boosted calibration models for low-cost PM2.5 sensor networks.

The package ingests collocated sensor/reference CSV time series, builds a
feature matrix (raw reading, position, temperature and humidity), trains
a second-order gradient-boosted tree ensemble (or a linear booster
baseline) on the calibration offset, fine-tunes trained models to new
networks, and reports RMSE per sensor and pooled. Hot tree-growing
kernels run through a compiled extension when available, with a pure
NumPy fallback selected at import; both produce bit-identical models.
"""

from aircal.errors import (
    AircalError,
    ConfigError,
    FormatVersionError,
    IntegrityError,
    ParseError,
    SchemaError,
    UnfillableColumnError,
)
from aircal.gbdt import (
    Ensemble,
    Hyperparams,
    RegressionTree,
    TrainReport,
    continue_training,
    find_best_split,
    grow_tree,
    predict,
    train,
)
from aircal.linear import LinearModel, LinearParams, predict_linear, train_linear
from aircal.preprocess import (
    FEATURE_NAMES,
    DataSplit,
    FeatureMatrix,
    FillStrategy,
    SplitMode,
    TargetMode,
    build_features,
    make_split,
)
from aircal.evaluate import EvalReport, evaluate, export_curves, rmse
from aircal.model_io import ModelMetadata, load, save
from aircal.synth import SynthConfig, generate
from aircal.tune import GridResult, ParamGrid, grid_search

__version__ = "0.1.0"

__all__ = [
    "AircalError",
    "ConfigError",
    "DataSplit",
    "Ensemble",
    "EvalReport",
    "FEATURE_NAMES",
    "FeatureMatrix",
    "FillStrategy",
    "FormatVersionError",
    "GridResult",
    "Hyperparams",
    "IntegrityError",
    "LinearModel",
    "LinearParams",
    "ModelMetadata",
    "ParamGrid",
    "ParseError",
    "RegressionTree",
    "SchemaError",
    "SplitMode",
    "SynthConfig",
    "TargetMode",
    "TrainReport",
    "UnfillableColumnError",
    "build_features",
    "continue_training",
    "evaluate",
    "export_curves",
    "find_best_split",
    "generate",
    "grid_search",
    "grow_tree",
    "load",
    "make_split",
    "predict",
    "predict_linear",
    "rmse",
    "save",
    "train",
    "train_linear",
    "__version__",
]
