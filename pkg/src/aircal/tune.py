"""Grid-search hyperparameter tuning driven by validation RMSE.

Every trial shares the base seed, so subsampling noise is held constant
across the grid and cells differ only in the knobs under test. Trials are
independent and could run concurrently; results are keyed by enumeration
index, and the winner is the earliest trial achieving the minimum, so any
execution order reproduces the sequential outcome.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from aircal.errors import ConfigError
from aircal.gbdt import Hyperparams, train
from aircal.preprocess import DataSplit, FeatureMatrix, TargetMode

# The only knobs a grid may range over.
TUNABLE = (
    "colsample_bytree",
    "eta",
    "max_depth",
    "min_child_weight",
    "n_rounds",
    "subsample",
)


@dataclass(frozen=True)
class ParamGrid:
    """Per-knob candidate values. Axis order inside the grid does not
    matter; enumeration always walks axis names sorted lexicographically,
    values in the given order."""

    axes: Mapping[str, Sequence]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "axes", {k: tuple(v) for k, v in dict(self.axes).items()}
        )
        if not self.axes:
            raise ConfigError("grid needs at least one axis")
        for name, values in self.axes.items():
            if name not in TUNABLE:
                raise ConfigError(
                    f"cannot tune {name!r}; tunable knobs are {TUNABLE}"
                )
            if len(values) == 0:
                raise ConfigError(f"grid axis {name!r} is empty")
            for value in values:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(
                        f"grid axis {name!r} has non-numeric value {value!r}"
                    )

    def combinations(self) -> list[dict]:
        names = sorted(self.axes)
        return [
            dict(zip(names, combo))
            for combo in product(*(self.axes[n] for n in names))
        ]


@dataclass(frozen=True)
class GridResult:
    """All trials in enumeration order plus the index of the winner
    (lowest validation RMSE at the trial's best iteration; earliest trial
    wins ties)."""

    trials: tuple[tuple[Hyperparams, float], ...]
    best: int

    @property
    def best_params(self) -> Hyperparams:
        return self.trials[self.best][0]

    @property
    def best_val_rmse(self) -> float:
        return self.trials[self.best][1]


def grid_search(
    grid: ParamGrid,
    matrix: FeatureMatrix,
    split: DataSplit,
    base: Hyperparams,
    target_mode: TargetMode = TargetMode.OFFSET,
) -> GridResult:
    """Train one model per grid cell (Cartesian product over sorted axis
    names) and record each cell's validation RMSE at its best
    iteration."""
    if np.asarray(split.val_idx).size == 0:
        raise ConfigError("grid search requires a nonempty validation partition")
    trials: list[tuple[Hyperparams, float]] = []
    best_idx = 0
    best_val = np.inf
    for i, combo in enumerate(grid.combinations()):
        try:
            params = replace(base, **combo)
        except ValueError as exc:
            raise ConfigError(f"grid cell {combo!r} is invalid: {exc}") from None
        _, report = train(matrix, split, params, target_mode)
        val = float(report.val_rmse[report.best_iteration])
        trials.append((params, val))
        if val < best_val:
            best_val = val
            best_idx = i
    return GridResult(trials=tuple(trials), best=best_idx)


def trials_to_csv(grid: ParamGrid, result: GridResult) -> str:
    """One line per trial: the swept knob values plus the achieved
    validation RMSE, in enumeration order."""
    names = sorted(grid.axes)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial"] + names + ["val_rmse"])
    for i, (params, val) in enumerate(result.trials):
        row = [str(i)]
        for name in names:
            value = getattr(params, name)
            row.append(repr(float(value)) if isinstance(value, float) else str(value))
        row.append(repr(float(val)))
        writer.writerow(row)
    return buf.getvalue()
