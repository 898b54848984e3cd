"""The numba kernels and their pure-numpy twins must agree."""

import numpy as np
import pytest

from pmefront import _kernels
from pmefront._backend import NUMBA_ENABLED


def stencil_case(n=400, width=5, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=n)
    cols = np.clip(np.arange(n)[:, None] + np.arange(width)[None, :]
                   - width // 2, 0, n - 1).astype(np.int64)
    wts = rng.normal(size=(n, width))
    return vals, cols, wts


def test_numpy_stencil_matches_csr():
    import scipy.sparse as sp
    vals, cols, wts = stencil_case()
    rows = np.repeat(np.arange(len(vals)), cols.shape[1])
    M = sp.csr_matrix((wts.ravel(), (rows, cols.ravel())),
                      shape=(len(vals), len(vals)))
    np.testing.assert_allclose(_kernels._apply_stencil_numpy(vals, cols, wts),
                               M @ vals, atol=1e-13)


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba backend disabled")
def test_stencil_backends_agree():
    vals, cols, wts = stencil_case()
    a = _kernels._apply_stencil_numba(vals, cols, wts)
    b = _kernels._apply_stencil_numpy(vals, cols, wts)
    np.testing.assert_allclose(a, b, atol=1e-13)


def height_case():
    from pmefront.domain import Domain
    from pmefront.fields import IntervalGrid
    from pmefront.oracle import quadratic_pressure_1d

    sol = quadratic_pressure_1d(2.0, 1.0)
    R0 = float(sol.R(1.0))
    grid = IntervalGrid(Domain.interval(-R0, R0), 201)
    prob = sol.problem(grid)
    xg = np.linspace(-R0 - 1.0, R0 + 1.0, 3001)
    vg = sol.v(xg, 1.05)
    args = (np.ascontiguousarray(grid.points),
            np.ascontiguousarray(prob.v0_data.grad[:, 0]),
            np.ascontiguousarray(prob.v0_data.values),
            vg, float(xg[0]), float(xg[1] - xg[0]),
            -0.5, 0.5, 81, 1e-12, 60)
    exact = sol.exact_height(grid.points, 1.05)
    return args, exact


def test_numpy_height_roots_accuracy():
    args, exact = height_case()
    h, status = _kernels._height_roots_1d_numpy(*args)
    assert np.all(status == _kernels.ROOT_OK)
    assert np.abs(h - exact).max() <= 1e-7


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba backend disabled")
def test_height_roots_backends_agree():
    args, exact = height_case()
    h_nb, s_nb = _kernels._height_roots_1d_numba(*args)
    h_np, s_np = _kernels._height_roots_1d_numpy(*args)
    np.testing.assert_array_equal(s_nb, s_np)
    # both iterate to their residual tolerance; they agree to that level
    assert np.abs(h_nb - h_np).max() <= 1e-7
    assert np.abs(h_nb - exact).max() <= 1e-8
