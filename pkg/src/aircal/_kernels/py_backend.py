"""Pure-numpy training kernels.

This module and the compiled `_cyimpl` expose the same two functions and
must produce bit-identical floats. Every arithmetic expression here is
written with the exact operand order of the compiled loop, and prefix sums
use np.cumsum, whose sequential accumulation matches a C running sum
(including the sign of a leading -0.0).
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def sweep_feature(
    values: np.ndarray,
    order: np.ndarray,
    pos: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    node_g: np.ndarray,
    node_h: np.ndarray,
    parent_score: np.ndarray,
    lam: float,
    gamma: float,
    min_child_weight: float,
    feature_id: int,
    best_gain: np.ndarray,
    best_feature: np.ndarray,
    best_threshold: np.ndarray,
    best_gl: np.ndarray,
    best_hl: np.ndarray,
) -> None:
    """Scan one feature across every active node and update the per-node
    best split in place.

    `order` lists row ids ascending by this feature's value; `pos` maps a
    row id to its node slot (negative = row not in play this round). A
    candidate threshold sits at the midpoint of each pair of distinct
    consecutive values within a node, and is kept only when it exceeds the
    left value, so the routing rule (value < threshold goes left) always
    reproduces the swept partition. Ties are never overwritten: only a
    strictly larger gain replaces the incumbent, which keeps the lowest
    feature id and lowest threshold among equals.
    """
    nd_all = pos[order]
    keep = nd_all >= 0
    rows = order[keep]
    nd_all = nd_all[keep]
    if rows.shape[0] == 0:
        return
    # Stable sort groups rows by node while preserving value order inside
    # each group, so each group's cumsum equals the compiled running sum.
    grouping = np.argsort(nd_all, kind="stable")
    rows = rows[grouping]
    nd_all = nd_all[grouping]
    edges = np.flatnonzero(np.diff(nd_all)) + 1
    starts = np.concatenate(([0], edges))
    stops = np.concatenate((edges, [nd_all.shape[0]]))
    vals = values[rows]
    g_run = grad[rows]
    h_run = hess[rows]
    for s, e in zip(starts, stops):
        if e - s < 2:
            continue
        node = int(nd_all[s])
        v = vals[s:e]
        gl = np.cumsum(g_run[s:e])[:-1]
        hl = np.cumsum(h_run[s:e])[:-1]
        thr = 0.5 * (v[:-1] + v[1:])
        gr = node_g[node] - gl
        hr = node_h[node] - hl
        den_l = hl + lam
        den_r = hr + lam
        ok = (v[1:] != v[:-1]) & (thr > v[:-1])
        ok &= (hl >= min_child_weight) & (hr >= min_child_weight)
        ok &= (den_l > 0.0) & (den_r > 0.0)
        if not ok.any():
            continue
        lt = np.divide(gl * gl, den_l, out=np.zeros_like(gl), where=ok)
        rt = np.divide(gr * gr, den_r, out=np.zeros_like(gr), where=ok)
        gain = 0.5 * (lt + rt - parent_score[node]) - gamma
        gain = np.where(ok, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > best_gain[node]:
            best_gain[node] = gain[j]
            best_feature[node] = feature_id
            best_threshold[node] = thr[j]
            best_gl[node] = gl[j]
            best_hl[node] = hl[j]


def add_tree_outputs(
    x: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    weight: np.ndarray,
    out: np.ndarray,
) -> None:
    """Route every row of `x` through one tree and add the landed leaf
    weight into `out` (exactly one IEEE add per row, as in the compiled
    walk)."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int32)
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        idx = node[rows]
        go_left = x[rows, feature[idx]] < threshold[idx]
        node[rows] = np.where(go_left, left[idx], right[idx])
        active = feature[node] >= 0
    out += weight[node]
