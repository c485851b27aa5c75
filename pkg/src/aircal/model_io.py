"""Versioned, deterministic model persistence.

Models serialize to JSON-syntax text with lexicographically sorted keys
and shortest round-trip float representation, so equal models produce
byte-identical documents and a load/save cycle is a fixpoint. The
conventional file extension is `.calib.json`. format_version is top-level
and mandatory; anything but the supported version is rejected before any
other field is looked at. Non-finite numbers are refused outright: a
canonical document can always be re-parsed by any strict JSON reader.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

import numpy as np

from aircal.errors import FormatVersionError, IntegrityError, ParseError, SchemaError
from aircal.gbdt import Ensemble, Hyperparams, RegressionTree, TrainReport
from aircal.linear import LinearModel, LinearParams
from aircal.preprocess import TargetMode

FORMAT_VERSION = 1
FILE_EXTENSION = ".calib.json"

Model = Union[Ensemble, LinearModel]


@dataclass(frozen=True)
class ModelMetadata:
    """Training provenance stored alongside the model."""

    rounds_run: int
    best_iteration: Optional[int]
    seed: int


def _tree_to_arrays(tree: RegressionTree) -> dict:
    return {
        "feature": [int(v) for v in tree.feature],
        "threshold": [float(v) for v in tree.threshold],
        "left": [int(v) for v in tree.left],
        "right": [int(v) for v in tree.right],
        "weight": [float(v) for v in tree.weight],
    }


def _params_to_doc(params: Union[Hyperparams, LinearParams]) -> dict:
    doc = {}
    for key, value in asdict(params).items():
        if isinstance(value, bool):
            raise IntegrityError(f"hyperparam {key!r} has non-numeric value")
        if isinstance(value, float):
            doc[key] = float(value)
        else:
            doc[key] = value
    return doc


def save(
    model: Model,
    report: Optional[TrainReport] = None,
    metadata: Optional[ModelMetadata] = None,
) -> str:
    """Serialize a model. Metadata comes from `metadata` when given, else
    from `report`, else zeros; passing the metadata returned by load()
    makes save a byte-exact inverse."""
    if metadata is None:
        if report is not None:
            metadata = ModelMetadata(
                rounds_run=len(report.train_rmse),
                best_iteration=report.best_iteration,
                seed=model.params.seed,
            )
        else:
            metadata = ModelMetadata(
                rounds_run=0, best_iteration=None, seed=model.params.seed
            )
    doc = {
        "format_version": FORMAT_VERSION,
        "booster_kind": model.booster_kind,
        "feature_names": list(model.feature_names),
        "target_mode": model.target_mode.value,
        "hyperparams": _params_to_doc(model.params),
        "metadata": {
            "rounds_run": int(metadata.rounds_run),
            "best_iteration": None
            if metadata.best_iteration is None
            else int(metadata.best_iteration),
            "seed": int(metadata.seed),
        },
    }
    if isinstance(model, Ensemble):
        doc["base_score"] = float(model.base_score)
        doc["trees"] = [_tree_to_arrays(t) for t in model.trees]
    elif isinstance(model, LinearModel):
        doc["base_score"] = float(model.bias)
        doc["weights"] = [float(w) for w in model.weights]
    else:
        raise SchemaError(f"cannot serialize {type(model).__name__}")
    try:
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise IntegrityError(f"model contains non-finite numbers: {exc}") from None


def _require(doc: dict, key: str, kinds, where: str):
    if key not in doc:
        raise IntegrityError(f"{where}: missing key {key!r}")
    value = doc[key]
    if not isinstance(value, kinds):
        raise IntegrityError(f"{where}: key {key!r} has wrong type")
    return value


def _finite_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise IntegrityError(f"{where}: expected a number")
    out = float(value)
    if not np.isfinite(out):
        raise IntegrityError(f"{where}: non-finite number")
    return out


def _load_tree(t: int, doc: dict, width: int) -> RegressionTree:
    where = f"tree {t}"
    if not isinstance(doc, dict):
        raise IntegrityError(f"{where}: expected an object of node arrays")
    expected = {"feature", "threshold", "left", "right", "weight"}
    if set(doc) != expected:
        raise IntegrityError(f"{where}: node arrays must be exactly {sorted(expected)}")
    arrays = {k: _require(doc, k, list, where) for k in expected}
    n = len(arrays["feature"])
    if n == 0:
        raise IntegrityError(f"{where}: empty node arrays")
    for key, arr in arrays.items():
        if len(arr) != n:
            raise IntegrityError(f"{where}: array {key!r} length != {n}")
    feature = []
    threshold = []
    left = []
    right = []
    weight = []
    for i in range(n):
        where_node = f"tree {t} node {i}"
        f = arrays["feature"][i]
        l = arrays["left"][i]
        r = arrays["right"][i]
        if isinstance(f, bool) or not isinstance(f, int):
            raise IntegrityError(f"{where_node}: feature must be an integer")
        if isinstance(l, bool) or not isinstance(l, int) or isinstance(r, bool) or not isinstance(r, int):
            raise IntegrityError(f"{where_node}: child ids must be integers")
        if f >= 0:
            if f >= width:
                raise IntegrityError(
                    f"{where_node}: feature index {f} >= width {width}"
                )
            for side, c in (("left", l), ("right", r)):
                if not 0 <= c < n:
                    raise IntegrityError(
                        f"{where_node}: {side} child id {c} out of range"
                    )
                if c <= i:
                    raise IntegrityError(
                        f"{where_node}: {side} child id {c} does not follow "
                        "its parent (cycle risk)"
                    )
        else:
            if f != -1:
                raise IntegrityError(f"{where_node}: leaf marker must be -1")
            if l != -1 or r != -1:
                raise IntegrityError(f"{where_node}: leaf children must be -1")
        feature.append(f)
        threshold.append(_finite_float(arrays["threshold"][i], where_node))
        left.append(l)
        right.append(r)
        weight.append(_finite_float(arrays["weight"][i], where_node))
    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        weight=np.asarray(weight, dtype=np.float64),
    )


def _load_params(doc: dict, cls, where: str):
    if not isinstance(doc, dict):
        raise IntegrityError(f"{where}: hyperparams must be an object")
    names = {f.name for f in fields(cls)}
    if set(doc) != names:
        raise IntegrityError(
            f"{where}: hyperparam keys must be exactly {sorted(names)}"
        )
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise IntegrityError(f"{where}: bad hyperparams: {exc}") from None


def load(text: str) -> tuple[Model, ModelMetadata]:
    """Parse and structurally validate a model document. The returned
    model predicts bit-identically to the one that was saved."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a valid model document: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    version = doc.get("format_version")
    if version is None:
        raise FormatVersionError("document lacks format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported format_version {version!r}; this build reads "
            f"{FORMAT_VERSION}"
        )
    kind = _require(doc, "booster_kind", str, "document")
    if kind not in ("tree", "linear"):
        raise SchemaError(f"unknown booster_kind {kind!r}")
    names = _require(doc, "feature_names", list, "document")
    if not all(isinstance(n, str) for n in names):
        raise IntegrityError("feature_names must all be text")
    mode_text = _require(doc, "target_mode", str, "document")
    try:
        mode = TargetMode(mode_text)
    except ValueError:
        raise IntegrityError(f"unknown target_mode {mode_text!r}") from None
    meta_doc = _require(doc, "metadata", dict, "document")
    if set(meta_doc) != {"rounds_run", "best_iteration", "seed"}:
        raise IntegrityError("metadata keys must be rounds_run/best_iteration/seed")
    best = meta_doc["best_iteration"]
    if best is not None and (isinstance(best, bool) or not isinstance(best, int)):
        raise IntegrityError("metadata best_iteration must be an integer or null")
    metadata = ModelMetadata(
        rounds_run=int(meta_doc["rounds_run"]),
        best_iteration=None if best is None else int(best),
        seed=int(meta_doc["seed"]),
    )
    base = _finite_float(_require(doc, "base_score", (int, float), "document"),
                         "base_score")
    expected_keys = {
        "format_version", "booster_kind", "feature_names", "target_mode",
        "hyperparams", "metadata", "base_score",
    }
    if kind == "tree":
        expected_keys.add("trees")
        if set(doc) != expected_keys:
            raise IntegrityError(
                f"document keys must be exactly {sorted(expected_keys)}"
            )
        params = _load_params(doc["hyperparams"], Hyperparams, "document")
        trees_doc = _require(doc, "trees", list, "document")
        trees = tuple(
            _load_tree(t, td, len(names)) for t, td in enumerate(trees_doc)
        )
        model: Model = Ensemble(
            base_score=base,
            trees=trees,
            feature_names=tuple(names),
            target_mode=mode,
            params=params,
        )
    else:
        expected_keys.add("weights")
        if set(doc) != expected_keys:
            raise IntegrityError(
                f"document keys must be exactly {sorted(expected_keys)}"
            )
        params = _load_params(doc["hyperparams"], LinearParams, "document")
        weights_doc = _require(doc, "weights", list, "document")
        if len(weights_doc) != len(names):
            raise IntegrityError(
                f"weights length {len(weights_doc)} != feature count {len(names)}"
            )
        weights = np.asarray(
            [_finite_float(w, f"weight {i}") for i, w in enumerate(weights_doc)],
            dtype=np.float64,
        )
        model = LinearModel(
            weights=weights,
            bias=base,
            feature_names=tuple(names),
            target_mode=mode,
            params=params,
        )
    return model, metadata
