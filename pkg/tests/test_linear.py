"""Linear baseline: coordinate-descent fit, shrinkage, prediction."""

import numpy as np
import pytest

from conftest import assert_bitwise
from aircal.errors import IntegrityError, SchemaError
from aircal.linear import LinearModel, LinearParams, predict_linear, train_linear
from aircal.preprocess import DataSplit, FeatureMatrix, TargetMode
from aircal.rng import SplitMix64


def line_matrix(n=50, slope=2.0, intercept=1.0, noise=0.0, seed=0):
    rng = SplitMix64(seed)
    x = rng.normal_block(n)
    y = slope * x + intercept
    if noise:
        y = y + noise * rng.normal_block(n)
    return FeatureMatrix(
        values=x.reshape(n, 1),
        feature_names=("f0",),
        labels=y,
        sensor_ids=tuple(f"S{i % 2}" for i in range(n)),
        row_timestamps=np.arange(n),
    )


def all_train(matrix):
    return DataSplit(
        train_idx=list(range(matrix.n_rows)), val_idx=[], test_idx=[]
    )


def test_zero_feature_model_is_mean():
    y = np.array([1.0, 2.0, 3.0, 6.0])
    matrix = FeatureMatrix(
        values=np.zeros((4, 0)),
        feature_names=(),
        labels=y,
        sensor_ids=("A", "A", "B", "B"),
        row_timestamps=np.arange(4),
    )
    model, report = train_linear(
        matrix, all_train(matrix), LinearParams(n_rounds=200, eta=1.0)
    )
    assert model.bias == pytest.approx(np.mean(y), abs=1e-12)
    assert model.weights.shape == (0,)
    assert report.train_rmse[-1] == pytest.approx(float(np.std(y)), abs=1e-12)


def test_recovers_line_against_lstsq():
    matrix = line_matrix(n=80, slope=2.0, intercept=1.0)
    model, _ = train_linear(
        matrix,
        all_train(matrix),
        LinearParams(n_rounds=500, eta=1.0, reg_lambda=0.0, alpha=0.0),
    )
    design = np.column_stack([matrix.values[:, 0], np.ones(80)])
    coef, *_ = np.linalg.lstsq(design, matrix.labels, rcond=None)
    assert abs(model.weights[0] - coef[0]) < 1e-3
    assert abs(model.bias - coef[1]) < 1e-3
    assert abs(model.weights[0] - 2.0) < 1e-3
    assert abs(model.bias - 1.0) < 1e-3


def test_huge_l2_shrinks_weights_to_zero():
    matrix = line_matrix(n=60, noise=0.1, seed=3)
    model, _ = train_linear(
        matrix,
        all_train(matrix),
        LinearParams(n_rounds=300, eta=1.0, reg_lambda=1e12),
    )
    assert abs(model.weights[0]) < 1e-6


def test_l1_zeroes_useless_feature():
    rng = SplitMix64(9)
    signal = rng.normal_block(100)
    junk = rng.normal_block(100)
    matrix = FeatureMatrix(
        values=np.column_stack([signal, junk]),
        feature_names=("signal", "junk"),
        labels=3.0 * signal,
        sensor_ids=tuple("S" for _ in range(100)),
        row_timestamps=np.arange(100),
    )
    model, _ = train_linear(
        matrix,
        all_train(matrix),
        LinearParams(n_rounds=400, eta=1.0, reg_lambda=0.0, alpha=5.0),
    )
    assert abs(model.weights[0]) > 1.0
    assert abs(model.weights[1]) < 0.05


def test_training_rmse_monotone():
    matrix = line_matrix(n=70, noise=0.5, seed=5)
    _, report = train_linear(
        matrix, all_train(matrix), LinearParams(n_rounds=50, eta=0.3)
    )
    curve = np.array(report.train_rmse)
    assert np.all(np.diff(curve) <= 1e-12)


def test_deterministic_reruns():
    matrix = line_matrix(n=40, noise=0.3, seed=7)
    split = DataSplit(train_idx=list(range(30)),
                      val_idx=list(range(30, 40)), test_idx=[])
    params = LinearParams(n_rounds=20)
    model_a, report_a = train_linear(matrix, split, params)
    model_b, report_b = train_linear(matrix, split, params)
    assert_bitwise(model_a.weights, model_b.weights)
    assert model_a.bias == model_b.bias
    assert report_a.train_rmse == report_b.train_rmse
    assert report_a.val_rmse == report_b.val_rmse
    assert report_a.best_iteration == report_b.best_iteration


def test_predict_hand_values():
    model = LinearModel(
        weights=np.array([2.0, -1.0]),
        bias=0.5,
        feature_names=("a", "b"),
        target_mode=TargetMode.OFFSET,
        params=LinearParams(),
    )
    out = predict_linear(model, np.array([[1.0, 1.0], [0.0, 2.0]]))
    assert out.tolist() == [1.5, -1.5]
    assert model.predict(np.array([[3.0, 0.0]])).tolist() == [6.5]


def test_predict_width_mismatch():
    model = LinearModel(
        weights=np.array([1.0]),
        bias=0.0,
        feature_names=("a",),
        target_mode=TargetMode.OFFSET,
        params=LinearParams(),
    )
    with pytest.raises(SchemaError):
        predict_linear(model, np.zeros((2, 2)))
    with pytest.raises(IntegrityError):
        predict_linear(model, np.array([[np.inf]]))


def test_empty_train_partition():
    matrix = line_matrix(n=10)
    split = DataSplit(train_idx=[], val_idx=list(range(10)), test_idx=[])
    with pytest.raises(ValueError):
        train_linear(matrix, split, LinearParams())


def test_param_validation():
    with pytest.raises(ValueError):
        LinearParams(eta=0.0)
    with pytest.raises(ValueError):
        LinearParams(n_rounds=0)
    with pytest.raises(ValueError):
        LinearParams(reg_lambda=-1.0)
    with pytest.raises(ValueError):
        LinearParams(alpha=-0.5)
