"""Numba and numpy kernel backends must agree."""

import numpy as np
import pytest

from ncgtv import _kernels_numpy as knp
from ncgtv._backend import backend_name

numba_kernels = pytest.importorskip("ncgtv._kernels_numba")

from helpers import random_graph
from ncgtv.graph import laplacian


def _random_system(rng, n_max=60):
    g = random_graph(rng, n_max=n_max, w_lo=0.05)
    lap = laplacian(g)
    diag = 2.0 + lap.diag  # SPD shift
    return diag, lap.ui, lap.uj, lap.uv, g


def test_spmv_agreement():
    rng = np.random.default_rng(0)
    for _ in range(10):
        diag, ui, uj, uv, g = _random_system(rng)
        x = rng.standard_normal(g.num_nodes)
        a = knp.spmv_sym(diag, ui, uj, uv, x)
        b = numba_kernels.spmv_sym(diag, ui, uj, uv, x)
        assert np.allclose(a, b, atol=1e-13)


def test_scatter_agreement():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(2, 50))
        m = int(rng.integers(1, 120))
        si = rng.integers(0, n, m)
        ei = rng.integers(0, n, m)
        vals = rng.standard_normal(m)
        a = knp.scatter_add_signed(n, si, ei, vals)
        b = numba_kernels.scatter_add_signed(n, si, ei, vals)
        assert np.allclose(a, b, atol=1e-13)


def test_penalty_weights_agreement():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = int(rng.integers(1, 200))
        w = rng.uniform(0, 1, m)
        diffs = rng.uniform(-1.5, 1.5, m)
        a = float(rng.uniform(0.2, 20.0))
        wp1, br1 = knp.penalty_weights(w, diffs, a, 1e-6)
        wp2, br2 = numba_kernels.penalty_weights(w, diffs, a, 1e-6)
        assert np.array_equal(br1, br2)
        assert np.allclose(wp1, wp2, atol=1e-14)


def test_cg_agreement_and_contract():
    rng = np.random.default_rng(3)
    for _ in range(5):
        diag, ui, uj, uv, g = _random_system(rng)
        b = rng.standard_normal(g.num_nodes)
        x0 = np.zeros(g.num_nodes)
        x1, _ = knp.cg_solve(diag, ui, uj, uv, b, x0, 1e-10, 2000)
        x2, _ = numba_kernels.cg_solve(diag, ui, uj, uv, b, x0, 1e-10, 2000)
        r1 = b - knp.spmv_sym(diag, ui, uj, uv, x1)
        r2 = b - knp.spmv_sym(diag, ui, uj, uv, x2)
        bn = np.linalg.norm(b)
        assert np.linalg.norm(r1) <= 1e-9 * bn + 1e-12
        assert np.linalg.norm(r2) <= 1e-9 * bn + 1e-12
        assert np.allclose(x1, x2, atol=1e-8)


def test_jacobi_agreement_with_eigh():
    rng = np.random.default_rng(4)
    for _ in range(8):
        n = int(rng.integers(2, 40))
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        v1 = knp.jacobi_min_eig(a.copy(), 64)
        v2 = numba_kernels.jacobi_min_eig(a.copy(), 64)
        ref = float(np.linalg.eigvalsh(a)[0])
        assert v1 == pytest.approx(ref, abs=1e-9)
        assert v2 == pytest.approx(ref, abs=1e-9)


def test_backend_selected():
    assert backend_name() in ("numba", "numpy")
