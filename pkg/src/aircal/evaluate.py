"""RMSE computation, per-sensor breakdown, and training-curve export.

Because the aggregation of a network-wide error is ambiguous (pool all
rows, or sum per-sensor errors?), EvalReport carries both: overall_rmse
over pooled rows and summed_rmse adding up per-sensor RMSEs. Curve CSVs
print floats with shortest round-trip precision, so exports are
reproducible byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from aircal.gbdt import TrainReport
from aircal.preprocess import FeatureMatrix


@dataclass(frozen=True)
class EvalReport:
    overall_rmse: float
    per_sensor_rmse: dict[str, float]
    summed_rmse: float
    n_rows: int


def rmse(pred: Sequence[float], target: Sequence[float]) -> float:
    """sqrt(mean(squared difference)) over paired, equal-length inputs."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.shape[0] == 0:
        raise ValueError("rmse of empty input")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def evaluate(model, matrix: FeatureMatrix, rows: Sequence[int]) -> EvalReport:
    """Score a model (tree or linear booster) on the given matrix rows;
    labels are compared in whatever target mode the matrix was built
    with."""
    idx = np.asarray(rows, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] == 0:
        raise ValueError("evaluate needs a nonempty row index list")
    pred = model.predict(matrix.values[idx])
    target = matrix.labels[idx]
    overall = rmse(pred, target)
    sids = np.asarray([matrix.sensor_ids[i] for i in idx], dtype=object)
    per_sensor: dict[str, float] = {}
    for sid in np.unique(sids):
        mask = sids == sid
        per_sensor[str(sid)] = rmse(pred[mask], target[mask])
    summed = float(sum(per_sensor.values()))
    return EvalReport(
        overall_rmse=overall,
        per_sensor_rmse=per_sensor,
        summed_rmse=summed,
        n_rows=int(idx.shape[0]),
    )


def export_curves(report: TrainReport) -> str:
    """Render per-round RMSE as CSV: header round,train_rmse,val_rmse, one
    line per round, 0-based round index, empty val cell when no validation
    set was used."""
    lines = ["round,train_rmse,val_rmse"]
    for i, tr in enumerate(report.train_rmse):
        if report.val_rmse is not None:
            val = repr(float(report.val_rmse[i]))
        else:
            val = ""
        lines.append(f"{i},{repr(float(tr))},{val}")
    return "\n".join(lines) + "\n"


def report_text(report: EvalReport) -> str:
    """Human-readable evaluation block."""
    lines = [
        f"rows evaluated : {report.n_rows}",
        f"overall RMSE   : {report.overall_rmse:.6f}",
        f"summed RMSE    : {report.summed_rmse:.6f}  "
        f"({len(report.per_sensor_rmse)} sensors)",
    ]
    for sid, value in report.per_sensor_rmse.items():
        lines.append(f"  {sid}: {value:.6f}")
    return "\n".join(lines) + "\n"


def report_json_line(report: EvalReport) -> str:
    """Machine-readable single-line record of the same numbers."""
    doc = {
        "n_rows": report.n_rows,
        "overall_rmse": report.overall_rmse,
        "per_sensor_rmse": report.per_sensor_rmse,
        "summed_rmse": report.summed_rmse,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
