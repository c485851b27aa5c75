"""Shared fixtures: small deterministic matrices and a live announcer."""

from __future__ import annotations

import numpy as np
import pytest

from aircal.ingest import group_by_sensor, parse_csv, table_to_csv, to_records
from aircal.preprocess import (
    FeatureMatrix,
    FillStrategy,
    SplitMode,
    TargetMode,
    build_features,
    impute_records,
    make_split,
    truncate_to_min,
)
from aircal.rng import SplitMix64
from aircal.synth import SynthConfig, generate, records_to_table


def random_matrix(n_rows: int, n_features: int, seed: int) -> FeatureMatrix:
    """Dense random matrix with a learnable label, for engine-level tests."""
    rng = SplitMix64(seed)
    values = rng.normal_block(n_rows * n_features).reshape(n_rows, n_features)
    weights = rng.normal_block(n_features)
    noise = rng.normal_block(n_rows)
    labels = values @ weights + 0.1 * noise
    names = tuple(f"f{j}" for j in range(n_features))
    sids = tuple("S0" if i % 2 == 0 else "S1" for i in range(n_rows))
    stamps = tuple(range(n_rows))
    return FeatureMatrix(
        values=values,
        feature_names=names,
        labels=labels,
        sensor_ids=sids,
        row_timestamps=stamps,
    )


def synth_matrix(
    n_sensors: int, n_timesteps: int, seed: int, **overrides
) -> FeatureMatrix:
    """Full pipeline at small scale: synth -> CSV round trip -> features."""
    config = SynthConfig(
        n_sensors=n_sensors, n_timesteps=n_timesteps, seed=seed, **overrides
    )
    table = records_to_table(generate(config))
    records = to_records(parse_csv(table_to_csv(table)))
    per_sensor = impute_records(
        group_by_sensor(records), FillStrategy.FORWARD_BACKWARD
    )
    matrix, _ = build_features(truncate_to_min(per_sensor), TargetMode.OFFSET)
    return matrix


def chrono_split(matrix: FeatureMatrix):
    return make_split(matrix.n_rows, SplitMode.CHRONOLOGICAL)


@pytest.fixture
def announce(capsys):
    """Print a line straight to the terminal, bypassing capture, so each
    acceptance criterion reports pass/fail even on quiet runs."""

    def emit(line: str) -> None:
        with capsys.disabled():
            print(line, flush=True)

    return emit


def assert_bitwise(a: np.ndarray, b: np.ndarray, context: str = "") -> None:
    a = np.asarray(a)
    b = np.asarray(b)
    assert a.shape == b.shape, context
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64)), context
