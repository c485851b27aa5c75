"""Backend selection and bit parity between the compiled and pure kernels."""

import subprocess
import sys

import numpy as np
import pytest

from conftest import assert_bitwise
from aircal._kernels import (
    available_backends,
    backend_name,
    get_backend,
    set_backend,
)
from aircal.errors import ConfigError
from aircal.rng import SplitMix64

both = pytest.mark.skipif(
    len(available_backends()) < 2, reason="single backend build"
)


@pytest.fixture
def restore_backend():
    previous = backend_name()
    yield
    set_backend(previous)


def test_python_backend_always_available():
    assert "python" in available_backends()


def test_compiled_backend_built_here():
    assert "cython" in available_backends()


def test_set_backend_switches(restore_backend):
    for name in available_backends():
        set_backend(name)
        assert backend_name() == name
        assert get_backend().NAME == name


def test_set_backend_rejects_unknown(restore_backend):
    with pytest.raises(ConfigError):
        set_backend("fortran")


def run_probe(env_value):
    code = (
        "import aircal._kernels as k\n"
        "print(k.backend_name())\n"
    )
    return subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "AIRCAL_KERNEL": env_value},
    )


def test_environment_override_selects_backend():
    proc = run_probe("python")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "python"


def test_environment_override_bad_value():
    proc = run_probe("turbo")
    assert proc.returncode != 0
    assert "ConfigError" in proc.stderr
    assert "turbo" in proc.stderr


def sweep_inputs(seed, n_rows, n_nodes):
    rng = SplitMix64(seed)
    values = rng.normal_block(n_rows)
    values = np.where(
        rng.uniform_open_block(n_rows) < 0.3, np.round(values), values
    )
    order = np.argsort(values, kind="stable").astype(np.int64)
    pos = (rng.u64_block(n_rows) % (n_nodes + 1)).astype(np.int32) - 1
    grad = rng.normal_block(n_rows)
    hess = np.ones(n_rows)
    node_g = np.zeros(n_nodes)
    node_h = np.zeros(n_nodes)
    for slot in range(n_nodes):
        mask = pos == slot
        node_g[slot] = grad[mask].sum()
        node_h[slot] = hess[mask].sum()
    lam = 1.0
    den = node_h + lam
    parent = np.divide(
        node_g * node_g, den, out=np.zeros(n_nodes), where=den > 0
    )
    return values, order, pos, grad, hess, node_g, node_h, parent, lam


def run_sweep(backend, inputs, gamma, mcw):
    values, order, pos, grad, hess, node_g, node_h, parent, lam = inputs
    n_nodes = node_g.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feature = np.full(n_nodes, -1, dtype=np.int32)
    best_threshold = np.zeros(n_nodes)
    best_gl = np.zeros(n_nodes)
    best_hl = np.zeros(n_nodes)
    backend.sweep_feature(
        values, order, pos, grad, hess,
        node_g, node_h, parent,
        lam, gamma, mcw, 3,
        best_gain, best_feature, best_threshold, best_gl, best_hl,
    )
    return best_gain, best_feature, best_threshold, best_gl, best_hl


@both
def test_sweep_feature_bit_parity():
    import aircal._kernels._cyimpl as cy
    import aircal._kernels.py_backend as py

    for seed in range(8):
        inputs = sweep_inputs(seed, n_rows=200 + 31 * seed, n_nodes=1 + seed % 4)
        for gamma, mcw in ((0.0, 0.0), (0.1, 2.0)):
            got_py = run_sweep(py, inputs, gamma, mcw)
            got_cy = run_sweep(cy, inputs, gamma, mcw)
            assert_bitwise(got_py[0], got_cy[0])
            assert np.array_equal(got_py[1], got_cy[1])
            assert_bitwise(got_py[2], got_cy[2])
            assert_bitwise(got_py[3], got_cy[3])
            assert_bitwise(got_py[4], got_cy[4])


@both
def test_add_tree_outputs_bit_parity():
    import aircal._kernels._cyimpl as cy
    import aircal._kernels.py_backend as py

    rng = SplitMix64(5)
    # A small complete tree of depth 2: nodes 0..6, children follow parent.
    feature = np.array([0, 1, 1, -1, -1, -1, -1], dtype=np.int32)
    threshold = np.array([0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
    left = np.array([1, 3, 5, -1, -1, -1, -1], dtype=np.int32)
    right = np.array([2, 4, 6, -1, -1, -1, -1], dtype=np.int32)
    weight = np.array([0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0])
    for trial in range(5):
        x = rng.normal_block(400).reshape(200, 2)
        base = rng.normal_block(200)
        out_py = base.copy()
        out_cy = base.copy()
        py.add_tree_outputs(x, feature, threshold, left, right, weight, out_py)
        cy.add_tree_outputs(x, feature, threshold, left, right, weight, out_cy)
        assert_bitwise(out_py, out_cy)
        # Every row moved by one of the four leaf weights.
        deltas = np.unique(out_py - base)
        assert set(np.round(deltas).tolist()) <= {1.0, 2.0, 3.0, 4.0}
