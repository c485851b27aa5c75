"""Record preprocessing: imputation, truncation to the shortest sensor
series, feature/label assembly, and the 7:1.5:1.5 split.

Feature values pass through untouched (no normalization, no scaling); the
trees never need it and exact pass-through keeps every downstream number
auditable. Imputation runs per sensor per column so fills never cross
sensor boundaries, and the label column is never imputed: a row without a
reference reading is excluded, not invented.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from aircal.errors import (
    IntegrityError,
    ParseError,
    SchemaError,
    UnfillableColumnError,
)
from aircal.ingest import SensorRecord
from aircal.rng import SplitMix64

# Fixed model input order; the label (reference PM2.5) is deliberately not
# a feature, since no reference exists where the model is actually used.
FEATURE_NAMES: tuple[str, ...] = (
    "raw_pm25",
    "longitude",
    "latitude",
    "temp_internal",
    "temp_external",
    "hum_internal",
    "hum_external",
)

# Channels that imputation may fill. Position columns cannot be missing and
# the label must never be fabricated, so neither appears here.
_FILLABLE_FIELDS = (
    "raw_pm25",
    "temp_internal",
    "temp_external",
    "hum_internal",
    "hum_external",
)

_MATRIX_EXTRA_COLUMNS = ("label", "sensor_id", "timestamp")


class FillStrategy(Enum):
    DROP_ROWS = "drop"
    IMPUTE_MEAN = "mean"
    IMPUTE_MEDIAN = "median"
    FORWARD_BACKWARD = "ffbf"


class TargetMode(Enum):
    # OFFSET predicts the calibration adjustment (reference - raw);
    # ABSOLUTE predicts the reference reading directly.
    OFFSET = "offset"
    ABSOLUTE = "absolute"


class SplitMode(Enum):
    CHRONOLOGICAL = "chrono"
    RANDOM = "random"


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Dense training input: rows x features, labels, and per-row sensor
    id / timestamp bookkeeping. No missing values, ever."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    sensor_ids: tuple[str, ...]
    row_timestamps: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.float64))
        stamps = np.ascontiguousarray(np.asarray(self.row_timestamps, dtype=np.int64))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_timestamps", stamps)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "sensor_ids", tuple(self.sensor_ids))
        if values.ndim != 2:
            raise IntegrityError("values must be 2-D")
        n = values.shape[0]
        if values.shape[1] != len(self.feature_names):
            raise IntegrityError("feature_names length != value width")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise IntegrityError("feature names must be unique")
        if labels.shape != (n,) or stamps.shape != (n,) or len(self.sensor_ids) != n:
            raise IntegrityError("row arrays must share one length")
        if not np.all(np.isfinite(values)):
            raise IntegrityError("feature values contain missing/non-finite cells")
        if not np.all(np.isfinite(labels)):
            raise IntegrityError("labels contain missing/non-finite cells")

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    def with_features(self, names: Sequence[str]) -> "FeatureMatrix":
        """A copy keeping only the named feature columns, in the given
        order (used e.g. to ablate the position features)."""
        idx = []
        for name in names:
            if name not in self.feature_names:
                raise SchemaError(f"no feature named {name!r}")
            idx.append(self.feature_names.index(name))
        return FeatureMatrix(
            values=self.values[:, idx],
            feature_names=tuple(names),
            labels=self.labels,
            sensor_ids=self.sensor_ids,
            row_timestamps=self.row_timestamps,
        )


@dataclass(frozen=True, eq=False)
class DataSplit:
    """Disjoint train/val/test row indices."""

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self) -> None:
        for name in ("train_idx", "val_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, arr)
        total = self.train_idx.size + self.val_idx.size + self.test_idx.size
        merged = np.concatenate((self.train_idx, self.val_idx, self.test_idx))
        if merged.size and merged.min() < 0:
            raise IntegrityError("negative row index in split")
        if np.unique(merged).size != total:
            raise IntegrityError("split partitions overlap")

    @property
    def n_rows(self) -> int:
        return int(self.train_idx.size + self.val_idx.size + self.test_idx.size)


def _is_missing(v: Optional[float]) -> bool:
    return v is None or (isinstance(v, float) and np.isnan(v))


def fill_missing(
    column: Sequence[Optional[float]], strategy: FillStrategy
) -> Union[list[float], list[bool]]:
    """Resolve missing cells in one column. Imputing strategies return the
    filled column; DROP_ROWS returns a mask that is True where the value
    is missing (the caller drops those rows). Missing is None or NaN."""
    miss = np.array([_is_missing(v) for v in column], dtype=bool)
    if strategy is FillStrategy.DROP_ROWS:
        return miss.tolist()
    vals = np.array(
        [0.0 if m else float(v) for m, v in zip(miss, column)], dtype=np.float64
    )
    observed = ~miss
    if not observed.any():
        raise UnfillableColumnError("column has no observed values to impute from")
    if strategy is FillStrategy.IMPUTE_MEAN:
        vals[miss] = float(np.mean(vals[observed]))
        return vals.tolist()
    if strategy is FillStrategy.IMPUTE_MEDIAN:
        vals[miss] = float(np.median(vals[observed]))
        return vals.tolist()
    if strategy is FillStrategy.FORWARD_BACKWARD:
        n = vals.shape[0]
        last_obs = np.where(observed, np.arange(n), -1)
        np.maximum.accumulate(last_obs, out=last_obs)
        out = vals[np.maximum(last_obs, 0)]
        # A leading gap has no earlier value; the backward pass fills it
        # from the first observed one.
        first = int(np.flatnonzero(observed)[0])
        out[last_obs < 0] = vals[first]
        return out.tolist()
    raise ValueError(f"unhandled strategy {strategy!r}")


def impute_records(
    per_sensor: Mapping[str, Sequence[SensorRecord]], strategy: FillStrategy
) -> dict[str, list[SensorRecord]]:
    """Apply one fill strategy to every fillable channel, sensor by
    sensor. DROP_ROWS removes rows where any feature channel or the
    reference reading is missing; imputing strategies fill feature
    channels only and leave the reference untouched."""
    out: dict[str, list[SensorRecord]] = {}
    for sid, recs in per_sensor.items():
        recs = list(recs)
        if strategy is FillStrategy.DROP_ROWS:
            drop = np.zeros(len(recs), dtype=bool)
            for field in _FILLABLE_FIELDS + ("ref_pm25",):
                col_mask = fill_missing([getattr(r, field) for r in recs], strategy)
                drop |= np.asarray(col_mask, dtype=bool)
            out[sid] = [r for r, d in zip(recs, drop) if not d]
            continue
        filled_cols = {}
        for field in _FILLABLE_FIELDS:
            col = [getattr(r, field) for r in recs]
            if all(_is_missing(v) for v in col):
                raise UnfillableColumnError(
                    f"sensor {sid!r}: column {field!r} has no observed values"
                )
            filled_cols[field] = fill_missing(col, strategy)
        out[sid] = [
            replace(rec, **{f: filled_cols[f][i] for f in _FILLABLE_FIELDS})
            for i, rec in enumerate(recs)
        ]
    return out


def truncate_to_min(
    per_sensor: Mapping[str, Sequence[SensorRecord]],
) -> dict[str, list[SensorRecord]]:
    """Equalize series lengths by keeping each sensor's first L records,
    where L is the shortest series length."""
    if not per_sensor:
        raise ValueError("no sensors to truncate")
    lengths = {sid: len(recs) for sid, recs in per_sensor.items()}
    if min(lengths.values()) == 0:
        empty = min(sid for sid, n in lengths.items() if n == 0)
        raise ValueError(f"sensor {empty!r} has no records")
    shortest = min(lengths.values())
    return {sid: list(recs[:shortest]) for sid, recs in per_sensor.items()}


def build_features(
    per_sensor: Mapping[str, Sequence[SensorRecord]], target_mode: TargetMode
) -> tuple[FeatureMatrix, int]:
    """Assemble the model input. Rows missing the reference reading are
    excluded (second return value counts them); a missing feature channel
    at this stage is an integrity error, since imputation was the place to
    resolve it. Rows are ordered by (timestamp, sensor_id) so a
    chronological split really is chronological."""
    feat_rows = []
    labels = []
    sids = []
    stamps = []
    excluded = 0
    for sid in sorted(per_sensor):
        for rec in per_sensor[sid]:
            if _is_missing(rec.ref_pm25):
                excluded += 1
                continue
            row = []
            for field in FEATURE_NAMES:
                v = getattr(rec, field)
                if _is_missing(v):
                    raise IntegrityError(
                        f"sensor {sid!r} t={rec.timestamp}: feature {field!r} "
                        "is missing; impute or drop before building features"
                    )
                row.append(float(v))
            if target_mode is TargetMode.OFFSET:
                labels.append(float(rec.ref_pm25) - float(rec.raw_pm25))
            else:
                labels.append(float(rec.ref_pm25))
            feat_rows.append(row)
            sids.append(sid)
            stamps.append(rec.timestamp)
    if not feat_rows:
        raise IntegrityError("no usable rows: every reference reading is missing")
    values = np.asarray(feat_rows, dtype=np.float64)
    stamps_arr = np.asarray(stamps, dtype=np.int64)
    _, sid_codes = np.unique(np.asarray(sids, dtype=object), return_inverse=True)
    order = np.lexsort((sid_codes, stamps_arr))
    matrix = FeatureMatrix(
        values=values[order],
        feature_names=FEATURE_NAMES,
        labels=np.asarray(labels, dtype=np.float64)[order],
        sensor_ids=tuple(sids[i] for i in order),
        row_timestamps=stamps_arr[order],
    )
    return matrix, excluded


def make_split(n_rows: int, mode: SplitMode, seed: int = 0) -> DataSplit:
    """Partition row indices 7:1.5:1.5. Sizes are floor(0.7n) and
    floor(0.15n) with the remainder going to test (integer arithmetic, so
    the parts always sum to n). Chronological order assigns the earliest
    rows to train; random mode permutes indices with the seeded generator
    first."""
    if n_rows < 3:
        raise ValueError(f"need at least 3 rows to split, got {n_rows}")
    n_train = (7 * n_rows) // 10
    n_val = (15 * n_rows) // 100
    if mode is SplitMode.CHRONOLOGICAL:
        idx = np.arange(n_rows, dtype=np.int64)
    elif mode is SplitMode.RANDOM:
        idx = SplitMix64(seed).permutation(n_rows)
    else:
        raise ValueError(f"unhandled split mode {mode!r}")
    return DataSplit(
        train_idx=np.sort(idx[:n_train]),
        val_idx=np.sort(idx[n_train : n_train + n_val]),
        test_idx=np.sort(idx[n_train + n_val :]),
    )


def split_to_json(split: DataSplit) -> str:
    doc = {
        "test": [int(i) for i in split.test_idx],
        "train": [int(i) for i in split.train_idx],
        "val": [int(i) for i in split.val_idx],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def split_from_json(text: str) -> DataSplit:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad split document: {exc}") from None
    for key in ("train", "val", "test"):
        if key not in doc:
            raise SchemaError(f"split document lacks {key!r}")
    return DataSplit(
        train_idx=np.asarray(doc["train"], dtype=np.int64),
        val_idx=np.asarray(doc["val"], dtype=np.int64),
        test_idx=np.asarray(doc["test"], dtype=np.int64),
    )


def matrix_to_csv(matrix: FeatureMatrix) -> str:
    """Persist a feature matrix as CSV (features, then label, sensor_id,
    timestamp). Reals print with shortest round-trip precision, so a
    parse-back reproduces every float bit for bit."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(matrix.feature_names) + list(_MATRIX_EXTRA_COLUMNS))
    for i in range(matrix.n_rows):
        row = [repr(float(v)) for v in matrix.values[i]]
        row.append(repr(float(matrix.labels[i])))
        row.append(matrix.sensor_ids[i])
        row.append(str(int(matrix.row_timestamps[i])))
        writer.writerow(row)
    return buf.getvalue()


def matrix_from_csv(text: str) -> FeatureMatrix:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: no header line") from None
    header = [h.strip() for h in header]
    if len(header) < len(_MATRIX_EXTRA_COLUMNS) + 1:
        raise SchemaError("matrix CSV needs at least one feature column")
    if tuple(header[-3:]) != _MATRIX_EXTRA_COLUMNS:
        raise SchemaError(
            f"matrix CSV must end with columns {_MATRIX_EXTRA_COLUMNS!r}"
        )
    feature_names = tuple(header[:-3])
    values = []
    labels = []
    sids = []
    stamps = []
    width = len(header)
    for lineno, raw in enumerate(reader, start=2):
        if not raw:
            continue
        if len(raw) != width:
            raise ParseError(f"line {lineno}: {len(raw)} cells vs {width} headers")
        try:
            values.append([float(c) for c in raw[: len(feature_names)]])
            labels.append(float(raw[-3]))
            stamps.append(int(raw[-1]))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        sids.append(raw[-2])
    return FeatureMatrix(
        values=np.asarray(values, dtype=np.float64).reshape(
            len(values), len(feature_names)
        ),
        feature_names=feature_names,
        labels=np.asarray(labels, dtype=np.float64),
        sensor_ids=tuple(sids),
        row_timestamps=np.asarray(stamps, dtype=np.int64),
    )
