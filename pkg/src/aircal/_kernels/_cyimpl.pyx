# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled training kernels.

Mirrors py_backend function for function; both must produce bit-identical
floats. Expressions here match the numpy forms operand for operand, and the
per-node running sums seed from the first value (not 0.0 + value) so a
leading -0.0 keeps its sign exactly as np.cumsum keeps it. Built without
-ffast-math on purpose: IEEE ordering is part of the contract.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"


cpdef void sweep_feature(
    double[::1] values,
    cnp.int64_t[::1] order,
    cnp.int32_t[::1] pos,
    double[::1] grad,
    double[::1] hess,
    double[::1] node_g,
    double[::1] node_h,
    double[::1] parent_score,
    double lam,
    double gamma,
    double min_child_weight,
    int feature_id,
    double[::1] best_gain,
    cnp.int32_t[::1] best_feature,
    double[::1] best_threshold,
    double[::1] best_gl,
    double[::1] best_hl,
):
    """Scan one feature across every active node and update the per-node
    best split in place. See py_backend.sweep_feature for the contract."""
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t n_nodes = node_g.shape[0]
    run_g_arr = np.zeros(n_nodes, dtype=np.float64)
    run_h_arr = np.zeros(n_nodes, dtype=np.float64)
    last_arr = np.zeros(n_nodes, dtype=np.float64)
    started_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef double[::1] run_g = run_g_arr
    cdef double[::1] run_h = run_h_arr
    cdef double[::1] last_val = last_arr
    cdef cnp.uint8_t[::1] started = started_arr
    cdef Py_ssize_t i
    cdef cnp.int64_t r
    cdef int nd
    cdef double v, gv, hv, thr, gl, hl, gr, hr, den_l, den_r, lt, rt, gain
    for i in range(m):
        r = order[i]
        nd = pos[r]
        if nd < 0:
            continue
        v = values[r]
        if started[nd] and v != last_val[nd]:
            thr = 0.5 * (last_val[nd] + v)
            # Midpoints that round down to the left value cannot be routed
            # consistently; skip them.
            if thr > last_val[nd]:
                gl = run_g[nd]
                hl = run_h[nd]
                gr = node_g[nd] - gl
                hr = node_h[nd] - hl
                den_l = hl + lam
                den_r = hr + lam
                if (hl >= min_child_weight and hr >= min_child_weight
                        and den_l > 0.0 and den_r > 0.0):
                    lt = gl * gl / den_l
                    rt = gr * gr / den_r
                    gain = 0.5 * (lt + rt - parent_score[nd]) - gamma
                    if gain > best_gain[nd]:
                        best_gain[nd] = gain
                        best_feature[nd] = feature_id
                        best_threshold[nd] = thr
                        best_gl[nd] = gl
                        best_hl[nd] = hl
        gv = grad[r]
        hv = hess[r]
        if started[nd]:
            run_g[nd] += gv
            run_h[nd] += hv
        else:
            run_g[nd] = gv
            run_h[nd] = hv
            started[nd] = 1
        last_val[nd] = v


cpdef void add_tree_outputs(
    double[:, ::1] x,
    cnp.int32_t[::1] feature,
    double[::1] threshold,
    cnp.int32_t[::1] left,
    cnp.int32_t[::1] right,
    double[::1] weight,
    double[::1] out,
):
    """Route every row of `x` through one tree and add the landed leaf
    weight into `out`."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef int nd
    for i in range(n):
        nd = 0
        while feature[nd] >= 0:
            if x[i, feature[nd]] < threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] += weight[nd]
