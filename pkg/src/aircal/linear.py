"""Linear booster: L1/L2-regularized linear regression fit by cyclic
coordinate descent, the comparison baseline for the tree model.

Coordinates update in fixed ascending feature order (never shuffled) so a
run is reproducible by construction. One boosting round = one full pass:
first the bias, then every coordinate, each update scaled by eta with
cached predictions refreshed immediately, so later coordinates always see
current gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from aircal.errors import IntegrityError, SchemaError
from aircal.gbdt import TrainReport, _rmse
from aircal.preprocess import DataSplit, FeatureMatrix, TargetMode


@dataclass(frozen=True)
class LinearParams:
    """Knobs for the linear booster. reg_lambda/alpha are the L2/L1
    strengths; defaults mirror the tree side's regularization."""

    eta: float = 0.3
    n_rounds: int = 100
    reg_lambda: float = 1.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.reg_lambda < 0.0:
            raise ValueError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True, eq=False)
class LinearModel:
    """bias + weights dot features."""

    weights: np.ndarray
    bias: float
    feature_names: tuple[str, ...]
    target_mode: TargetMode
    params: LinearParams

    booster_kind: ClassVar[str] = "linear"

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if w.ndim != 1 or w.shape[0] != len(self.feature_names):
            raise IntegrityError("weights length != feature count")

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return predict_linear(self, rows)


def _soft_threshold(z: float, alpha: float) -> float:
    if z > alpha:
        return z - alpha
    if z < -alpha:
        return z + alpha
    return 0.0


def train_linear(
    matrix: FeatureMatrix,
    split: DataSplit,
    params: LinearParams,
    target_mode: TargetMode = TargetMode.OFFSET,
) -> tuple[LinearModel, TrainReport]:
    """Fit by cyclic coordinate descent. Per pass and coordinate j the
    update solves the second-order step
    delta_j = -S(sum(g_i x_ij) + lambda w_j, alpha) / (sum(x_ij^2) + lambda)
    (h_i = 1 for squared loss), applied as w_j += eta * delta_j."""
    tr = np.asarray(split.train_idx, dtype=np.int64)
    if tr.shape[0] == 0:
        raise ValueError("train partition is empty")
    x = matrix.values[tr]
    y = matrix.labels[tr]
    va = np.asarray(split.val_idx, dtype=np.int64)
    has_val = va.shape[0] > 0
    xv = matrix.values[va] if has_val else None
    yv = matrix.labels[va] if has_val else None
    n, width = x.shape
    bias = float(np.mean(y))
    weights = np.zeros(width, dtype=np.float64)
    pred = np.full(n, bias, dtype=np.float64)
    pred_v = None
    if has_val:
        pred_v = np.full(xv.shape[0], bias, dtype=np.float64)
    col_sq = [float(np.dot(x[:, j], x[:, j])) for j in range(width)]
    train_curve = []
    val_curve = []
    for _ in range(params.n_rounds):
        g_sum = float(np.sum(pred - y))
        delta_b = params.eta * (-g_sum / n)
        bias += delta_b
        pred += delta_b
        if has_val:
            pred_v += delta_b
        for j in range(width):
            xj = x[:, j]
            grad_j = float(np.dot(pred - y, xj)) + params.reg_lambda * weights[j]
            den = col_sq[j] + params.reg_lambda
            if den <= 0.0:
                continue
            delta = params.eta * (-_soft_threshold(grad_j, params.alpha) / den)
            if delta == 0.0:
                continue
            weights[j] += delta
            pred += delta * xj
            if has_val:
                pred_v += delta * xv[:, j]
        train_curve.append(_rmse(pred, y))
        if has_val:
            val_curve.append(_rmse(pred_v, yv))
    best_iter = int(np.argmin(val_curve)) if val_curve else None
    report = TrainReport(
        train_rmse=tuple(train_curve),
        val_rmse=tuple(val_curve) if has_val else None,
        best_iteration=best_iter,
    )
    model = LinearModel(
        weights=weights,
        bias=float(bias),
        feature_names=tuple(matrix.feature_names),
        target_mode=target_mode,
        params=params,
    )
    return model, report


def predict_linear(model: LinearModel, rows: np.ndarray) -> np.ndarray:
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2:
        raise SchemaError("prediction input must be 2-D (rows x features)")
    if x.shape[1] != model.weights.shape[0]:
        raise SchemaError(
            f"row width {x.shape[1]} != model width {model.weights.shape[0]}"
        )
    if not np.all(np.isfinite(x)):
        raise IntegrityError("prediction input contains non-finite values")
    return model.bias + x @ model.weights
