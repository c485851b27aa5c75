"""Second-order gradient-boosted regression trees.

Exact greedy split finding, shrinkage, row/feature subsampling,
validation-guided early stopping, and warm-start continued boosting.
Squared loss throughout: g = prediction - target, h = 1.

Determinism contract: a training run is a pure function of
(matrix contents, split, Hyperparams). Training rows are brought into a
canonical content order first (sorted by feature columns, then label), so
the caller's row order never matters; feature sweeps may run in any order
or in parallel because the strict greater-than tie-break reproduces the
sequential lowest-feature-then-lowest-threshold winner. All hot loops go
through the active kernel backend (compiled or numpy), which are
bit-for-bit interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import ClassVar, Optional, Sequence

import numpy as np

from aircal._kernels import get_backend
from aircal.errors import IntegrityError, SchemaError
from aircal.preprocess import DataSplit, FeatureMatrix, TargetMode
from aircal.rng import SplitMix64


@dataclass(frozen=True)
class Hyperparams:
    """All boosting knobs.

    min_child_weight bounds the hessian sum of each child; for squared
    loss (h = 1 per row) that is simply a minimum row count per child.
    max_depth counts edges from the root, so max_depth=0 grows a single
    leaf. early_stopping_rounds, when set, stops training once validation
    RMSE has not improved for that many rounds.
    """

    eta: float = 0.3
    n_rounds: int = 100
    max_depth: int = 6
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    seed: int = 0
    early_stopping_rounds: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        if not 0.0 < self.colsample_bytree <= 1.0:
            raise ValueError(
                f"colsample_bytree must be in (0, 1], got {self.colsample_bytree}"
            )
        if self.min_child_weight < 0.0:
            raise ValueError(
                f"min_child_weight must be >= 0, got {self.min_child_weight}"
            )
        if self.reg_lambda < 0.0:
            raise ValueError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds < 1:
            raise ValueError(
                "early_stopping_rounds must be >= 1 when set, "
                f"got {self.early_stopping_rounds}"
            )


@dataclass(frozen=True)
class GradHess:
    """First and second derivative of the squared loss at one row."""

    g: float
    h: float


@dataclass(frozen=True)
class SplitSpec:
    """An accepted split: gain > 0 and both children satisfy
    min_child_weight. left/right_stats are (G, H) sums."""

    feature_index: int
    threshold: float
    gain: float
    left_stats: tuple[float, float]
    right_stats: tuple[float, float]


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat node arrays; node 0 is the root.

    feature[i] >= 0 marks an internal node with children left[i]/right[i]
    (both always > i, which makes the structure acyclic by construction);
    feature[i] == -1 marks a leaf whose weight is already eta-scaled.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    def __post_init__(self) -> None:
        n = self.feature.shape[0]
        for name in ("threshold", "left", "right", "weight"):
            if getattr(self, name).shape[0] != n:
                raise IntegrityError(f"tree array {name!r} length != {n}")
        if n == 0:
            raise IntegrityError("tree must have at least one node")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A trained tree model: prediction = base_score + sum of tree outputs."""

    base_score: float
    trees: tuple[RegressionTree, ...]
    feature_names: tuple[str, ...]
    target_mode: TargetMode
    params: Hyperparams

    booster_kind: ClassVar[str] = "tree"

    def __post_init__(self) -> None:
        width = len(self.feature_names)
        for t, tree in enumerate(self.trees):
            if tree.feature.size and int(tree.feature.max()) >= width:
                raise IntegrityError(
                    f"tree {t} references feature >= width {width}"
                )

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return predict(self, rows)


@dataclass(frozen=True)
class TrainReport:
    """Per-round RMSE trail; the data behind a training curve.

    Lengths equal the rounds actually run, even when early stopping later
    truncates the ensemble. best_iteration is the argmin of val_rmse
    (first minimum on ties) and None without a validation set.
    """

    train_rmse: tuple[float, ...]
    val_rmse: Optional[tuple[float, ...]]
    best_iteration: Optional[int]


def grad_hess(pred: float, target: float) -> GradHess:
    """Derivatives of 0.5 * (pred - target)^2 with respect to pred."""
    if not (np.isfinite(pred) and np.isfinite(target)):
        raise ValueError("grad_hess requires finite pred and target")
    return GradHess(g=float(pred) - float(target), h=1.0)


def leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    """Optimal leaf value -G/(H + lambda); 0 when the denominator is 0.
    The + 0.0 folds -0.0 into +0.0 so stored models never carry a signed
    zero."""
    den = h_sum + reg_lambda
    if den <= 0.0:
        return 0.0
    return -g_sum / den + 0.0


def split_gain(
    gl: float, hl: float, gr: float, hr: float, reg_lambda: float, gamma: float
) -> float:
    """Objective reduction of a candidate split; quotients with a zero
    denominator contribute 0."""

    def score(g: float, h: float) -> float:
        den = h + reg_lambda
        if den <= 0.0:
            return 0.0
        return g * g / den

    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma


def _seq_sum(a: np.ndarray) -> float:
    # cumsum accumulates sequentially, unlike np.sum's pairwise order; the
    # kernels' running sums must match this bit for bit.
    if a.shape[0] == 0:
        return 0.0
    return float(np.cumsum(a)[-1])


def _rmse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Content-based row order: primary key feature 0, then the remaining
    # features, then the label. Makes training invariant to input row
    # permutations (identical rows are interchangeable).
    keys = (y,) + tuple(x[:, f] for f in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


def _columns(x: np.ndarray) -> list[np.ndarray]:
    return [np.ascontiguousarray(x[:, f]) for f in range(x.shape[1])]


def _presort(cols: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.argsort(c, kind="stable").astype(np.int64, copy=False) for c in cols]


def _shrunk_leaf(g_sum: float, h_sum: float, reg_lambda: float, eta: float) -> float:
    return float(eta * leaf_weight(g_sum, h_sum, reg_lambda) + 0.0)


def _grow(
    xt: np.ndarray,
    xcols: Sequence[np.ndarray],
    orders: Sequence[np.ndarray],
    g: np.ndarray,
    h: np.ndarray,
    sub_rows: Optional[np.ndarray],
    feats: np.ndarray,
    params: Hyperparams,
    backend,
) -> RegressionTree:
    """Level-wise growth. pos[] maps each row to its frontier slot; rows
    outside the round's subsample stay at -1 and are invisible to the
    sweeps. Child (G, H) totals come from the winning sweep's left prefix
    and the parent-minus-left remainder, so both kernel backends see
    identical node statistics at every level."""
    n = g.shape[0]
    lam = params.reg_lambda
    pos = np.full(n, -1, dtype=np.int32)
    if sub_rows is None:
        pos[:] = 0
        node_g = np.array([_seq_sum(g)])
        node_h = np.array([_seq_sum(h)])
    else:
        pos[sub_rows] = 0
        node_g = np.array([_seq_sum(g[sub_rows])])
        node_h = np.array([_seq_sum(h[sub_rows])])
    feature_l = [-1]
    threshold_l = [0.0]
    left_l = [-1]
    right_l = [-1]
    weight_l = [0.0]
    slot_ids = [0]
    depth = 0
    while slot_ids:
        k = len(slot_ids)
        if depth >= params.max_depth:
            for s in range(k):
                weight_l[slot_ids[s]] = _shrunk_leaf(
                    node_g[s], node_h[s], lam, params.eta
                )
            break
        den = node_h + lam
        parent_score = np.divide(
            node_g * node_g, den, out=np.zeros(k), where=den > 0.0
        )
        best_gain = np.zeros(k)
        best_feature = np.full(k, -1, dtype=np.int32)
        best_threshold = np.zeros(k)
        best_gl = np.zeros(k)
        best_hl = np.zeros(k)
        for f in feats:
            backend.sweep_feature(
                xcols[f],
                orders[f],
                pos,
                g,
                h,
                node_g,
                node_h,
                parent_score,
                lam,
                params.gamma,
                params.min_child_weight,
                int(f),
                best_gain,
                best_feature,
                best_threshold,
                best_gl,
                best_hl,
            )
        left_slot = np.full(k, -1, dtype=np.int64)
        right_slot = np.full(k, -1, dtype=np.int64)
        next_ids: list[int] = []
        next_g: list[float] = []
        next_h: list[float] = []
        for s in range(k):
            nid = slot_ids[s]
            if best_feature[s] < 0:
                weight_l[nid] = _shrunk_leaf(node_g[s], node_h[s], lam, params.eta)
                continue
            lid = len(feature_l)
            for _ in range(2):
                feature_l.append(-1)
                threshold_l.append(0.0)
                left_l.append(-1)
                right_l.append(-1)
                weight_l.append(0.0)
            feature_l[nid] = int(best_feature[s])
            threshold_l[nid] = float(best_threshold[s])
            left_l[nid] = lid
            right_l[nid] = lid + 1
            left_slot[s] = len(next_ids)
            next_ids.append(lid)
            next_g.append(float(best_gl[s]))
            next_h.append(float(best_hl[s]))
            right_slot[s] = len(next_ids)
            next_ids.append(lid + 1)
            next_g.append(float(node_g[s] - best_gl[s]))
            next_h.append(float(node_h[s] - best_hl[s]))
        if not next_ids:
            break
        rows_act = np.flatnonzero(pos >= 0)
        slots = pos[rows_act]
        has = best_feature[slots] >= 0
        rows_s = rows_act[has]
        slots_s = slots[has].astype(np.int64)
        go_left = xt[rows_s, best_feature[slots_s]] < best_threshold[slots_s]
        pos = np.full(n, -1, dtype=np.int32)
        pos[rows_s] = np.where(
            go_left, left_slot[slots_s], right_slot[slots_s]
        ).astype(np.int32)
        slot_ids = next_ids
        node_g = np.asarray(next_g)
        node_h = np.asarray(next_h)
        depth += 1
    return RegressionTree(
        feature=np.asarray(feature_l, dtype=np.int32),
        threshold=np.asarray(threshold_l, dtype=np.float64),
        left=np.asarray(left_l, dtype=np.int32),
        right=np.asarray(right_l, dtype=np.int32),
        weight=np.asarray(weight_l, dtype=np.float64),
    )


def _as_rows_array(n: int, rows: Optional[Sequence[int]]) -> np.ndarray:
    if rows is None:
        return np.arange(n, dtype=np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError("rows must be a nonempty 1-D index collection")
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError("row index out of range")
    return np.sort(arr)


def find_best_split(
    x: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: Hyperparams,
    rows: Optional[Sequence[int]] = None,
    allowed_features: Optional[Sequence[int]] = None,
) -> Optional[SplitSpec]:
    """Exact greedy best split over the given rows, or None when no
    candidate has positive gain. Thresholds are midpoints between distinct
    consecutive sorted values; both children must reach min_child_weight.
    Ties break to higher gain, then lower feature index, then lower
    threshold."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    g = np.ascontiguousarray(np.asarray(grad, dtype=np.float64))
    h = np.ascontiguousarray(np.asarray(hess, dtype=np.float64))
    n, width = x.shape
    sub = _as_rows_array(n, rows)
    if allowed_features is None:
        feats = np.arange(width, dtype=np.int64)
    else:
        feats = np.asarray(sorted(allowed_features), dtype=np.int64)
        if feats.size and (feats.min() < 0 or feats.max() >= width):
            raise ValueError("feature index out of range")
    xcols = _columns(x)
    orders = _presort(xcols)
    pos = np.full(n, -1, dtype=np.int32)
    pos[sub] = 0
    node_g = np.array([_seq_sum(g[sub])])
    node_h = np.array([_seq_sum(h[sub])])
    den = node_h + params.reg_lambda
    parent_score = np.divide(node_g * node_g, den, out=np.zeros(1), where=den > 0.0)
    best_gain = np.zeros(1)
    best_feature = np.full(1, -1, dtype=np.int32)
    best_threshold = np.zeros(1)
    best_gl = np.zeros(1)
    best_hl = np.zeros(1)
    backend = get_backend()
    for f in feats:
        backend.sweep_feature(
            xcols[f],
            orders[f],
            pos,
            g,
            h,
            node_g,
            node_h,
            parent_score,
            params.reg_lambda,
            params.gamma,
            params.min_child_weight,
            int(f),
            best_gain,
            best_feature,
            best_threshold,
            best_gl,
            best_hl,
        )
    if best_feature[0] < 0:
        return None
    gl = float(best_gl[0])
    hl = float(best_hl[0])
    return SplitSpec(
        feature_index=int(best_feature[0]),
        threshold=float(best_threshold[0]),
        gain=float(best_gain[0]),
        left_stats=(gl, hl),
        right_stats=(float(node_g[0] - gl), float(node_h[0] - hl)),
    )


def grow_tree(
    x: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: Hyperparams,
    rows: Optional[Sequence[int]] = None,
    features: Optional[Sequence[int]] = None,
) -> RegressionTree:
    """Grow one tree on the given rows; leaf weights are already
    eta-scaled."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    g = np.ascontiguousarray(np.asarray(grad, dtype=np.float64))
    h = np.ascontiguousarray(np.asarray(hess, dtype=np.float64))
    n, width = x.shape
    sub = _as_rows_array(n, rows)
    if features is None:
        feats = np.arange(width, dtype=np.int64)
    else:
        feats = np.asarray(sorted(features), dtype=np.int64)
    xcols = _columns(x)
    orders = _presort(xcols)
    backend = get_backend()
    sub_rows = None if sub.shape[0] == n else sub
    return _grow(x, xcols, orders, g, h, sub_rows, feats, params, backend)


def _boost_rounds(
    xt: np.ndarray,
    yt: np.ndarray,
    xv: Optional[np.ndarray],
    yv: Optional[np.ndarray],
    pred_t: np.ndarray,
    pred_v: Optional[np.ndarray],
    params: Hyperparams,
    n_rounds: int,
) -> tuple[list[RegressionTree], TrainReport]:
    """The boosting loop shared by train and continue_training. Per round:
    draw the row subsample, then the feature subsample (that draw order is
    part of the seed contract; a fraction of exactly 1.0 draws nothing),
    fit a tree to the current gradients, and refresh cached predictions
    for all rows."""
    backend = get_backend()
    n = xt.shape[0]
    width = xt.shape[1]
    xcols = _columns(xt)
    orders = _presort(xcols)
    h = np.ones(n, dtype=np.float64)
    rng = SplitMix64(params.seed)
    has_val = xv is not None and xv.shape[0] > 0
    if params.early_stopping_rounds is not None and not has_val:
        raise ValueError("early_stopping_rounds requires a validation partition")
    trees: list[RegressionTree] = []
    train_curve: list[float] = []
    val_curve: list[float] = []
    best_val = np.inf
    best_round = -1
    for rnd in range(n_rounds):
        if params.subsample < 1.0:
            k = max(1, int(params.subsample * n))
            sub_rows = rng.sample_sorted(n, k)
        else:
            sub_rows = None
        if params.colsample_bytree < 1.0:
            fk = max(1, int(params.colsample_bytree * width))
            feats = rng.sample_sorted(width, fk)
        else:
            feats = np.arange(width, dtype=np.int64)
        g = pred_t - yt
        tree = _grow(xt, xcols, orders, g, h, sub_rows, feats, params, backend)
        trees.append(tree)
        backend.add_tree_outputs(
            xt, tree.feature, tree.threshold, tree.left, tree.right, tree.weight,
            pred_t,
        )
        train_curve.append(_rmse(pred_t, yt))
        if has_val:
            backend.add_tree_outputs(
                xv, tree.feature, tree.threshold, tree.left, tree.right,
                tree.weight, pred_v,
            )
            val_curve.append(_rmse(pred_v, yv))
            if val_curve[-1] < best_val:
                best_val = val_curve[-1]
                best_round = rnd
            if (
                params.early_stopping_rounds is not None
                and rnd - best_round >= params.early_stopping_rounds
            ):
                break
    if has_val:
        report = TrainReport(
            train_rmse=tuple(train_curve),
            val_rmse=tuple(val_curve),
            best_iteration=best_round if best_round >= 0 else None,
        )
        if params.early_stopping_rounds is not None:
            trees = trees[: best_round + 1]
    else:
        report = TrainReport(
            train_rmse=tuple(train_curve), val_rmse=None, best_iteration=None
        )
    return trees, report


def _train_arrays(
    matrix: FeatureMatrix, split: DataSplit
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    tr = np.asarray(split.train_idx, dtype=np.int64)
    if tr.shape[0] == 0:
        raise ValueError("train partition is empty")
    n = matrix.values.shape[0]
    for name, idx in (("train", tr), ("val", np.asarray(split.val_idx, np.int64))):
        if idx.shape[0] and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"{name} index out of range")
    x_raw = matrix.values[tr]
    y_raw = matrix.labels[tr]
    order = _canonical_order(x_raw, y_raw)
    xt = np.ascontiguousarray(x_raw[order])
    yt = np.ascontiguousarray(y_raw[order])
    va = np.asarray(split.val_idx, dtype=np.int64)
    if va.shape[0]:
        xv = np.ascontiguousarray(matrix.values[va])
        yv = np.ascontiguousarray(matrix.labels[va])
    else:
        xv = None
        yv = None
    return xt, yt, xv, yv


def train(
    matrix: FeatureMatrix,
    split: DataSplit,
    params: Hyperparams,
    target_mode: TargetMode = TargetMode.OFFSET,
) -> tuple[Ensemble, TrainReport]:
    """Boost params.n_rounds trees from a base score equal to the training
    label mean. With early stopping enabled the returned ensemble keeps
    trees up to best_iteration; the report always covers every round run."""
    xt, yt, xv, yv = _train_arrays(matrix, split)
    if not np.all(np.isfinite(yt)):
        raise IntegrityError("training labels must be finite")
    base = float(np.mean(yt))
    pred_t = np.full(xt.shape[0], base, dtype=np.float64)
    pred_v = np.full(xv.shape[0], base, dtype=np.float64) if xv is not None else None
    trees, report = _boost_rounds(
        xt, yt, xv, yv, pred_t, pred_v, params, params.n_rounds
    )
    model = Ensemble(
        base_score=base,
        trees=tuple(trees),
        feature_names=tuple(matrix.feature_names),
        target_mode=target_mode,
        params=params,
    )
    return model, report


def continue_training(
    model: Ensemble,
    matrix: FeatureMatrix,
    split: DataSplit,
    extra_rounds: int,
    params: Optional[Hyperparams] = None,
) -> tuple[Ensemble, TrainReport]:
    """Warm-start boosting: keep base score and existing trees, initialize
    cached predictions by evaluating the model on the new data, then boost
    extra_rounds more trees (under `params` when given, else the model's
    own). With subsample and colsample at exactly 1.0 this is equivalent
    to having trained the combined round count in one run."""
    if not isinstance(model, Ensemble):
        raise SchemaError("continue_training requires a tree ensemble")
    if tuple(matrix.feature_names) != tuple(model.feature_names):
        raise SchemaError(
            f"feature names {tuple(matrix.feature_names)!r} do not match "
            f"the model's {tuple(model.feature_names)!r}"
        )
    if extra_rounds < 0:
        raise ValueError("extra_rounds must be >= 0")
    params = model.params if params is None else params
    if extra_rounds == 0:
        report = TrainReport(train_rmse=(), val_rmse=None, best_iteration=None)
        return replace(model, params=params), report
    xt, yt, xv, yv = _train_arrays(matrix, split)
    if not np.all(np.isfinite(yt)):
        raise IntegrityError("training labels must be finite")
    pred_t = predict(model, xt)
    pred_v = predict(model, xv) if xv is not None else None
    new_trees, report = _boost_rounds(
        xt, yt, xv, yv, pred_t, pred_v, params, extra_rounds
    )
    out = Ensemble(
        base_score=model.base_score,
        trees=tuple(model.trees) + tuple(new_trees),
        feature_names=model.feature_names,
        target_mode=model.target_mode,
        params=params,
    )
    return out, report


def predict(model: Ensemble, rows: np.ndarray) -> np.ndarray:
    """base_score plus every tree's routed leaf weight. Routing is strict:
    a value equal to the threshold goes right."""
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2:
        raise SchemaError("prediction input must be 2-D (rows x features)")
    if x.shape[1] != len(model.feature_names):
        raise SchemaError(
            f"row width {x.shape[1]} != model width {len(model.feature_names)}"
        )
    if not np.all(np.isfinite(x)):
        raise IntegrityError("prediction input contains non-finite values")
    x = np.ascontiguousarray(x)
    out = np.full(x.shape[0], model.base_score, dtype=np.float64)
    backend = get_backend()
    for tree in model.trees:
        backend.add_tree_outputs(
            x, tree.feature, tree.threshold, tree.left, tree.right, tree.weight, out
        )
    return out
