"""Hot numeric kernels: numba ``@njit`` versions with pure-numpy fallbacks.

Two loops dominate runtime at desk scale and live here:

* ``apply_stencil`` — application of a padded finite-difference stencil
  table (one row of column indices / weights per node).
* ``height_roots_1d`` — the per-node safeguarded Newton/bisection solve of
  the implicit height relation along transversal segments, with 4-point
  Lagrange (cubic) interpolation of the pressure snapshot.

The active implementation is chosen by :mod:`pmefront._backend`
(``PMEFRONT_NUMBA`` environment flag).  Both paths are kept test-equal by
``tests/test_backends.py`` and timed by ``benchmarks/bench_backends.py``.
"""

import numpy as np

from ._backend import NUMBA_ENABLED

# Root-solve status codes shared by both backends.
ROOT_OK = 0
ROOT_NONE = 1
ROOT_MULTIPLE = 2


# --------------------------------------------------------------------------
# pure-numpy implementations
# --------------------------------------------------------------------------

def _apply_stencil_numpy(values, cols, wts):
    # padded rows carry weight 0, so gather-and-sum is safe
    return np.einsum("ns,ns->n", wts, values[cols])


def _cubic_eval_numpy(vgrid, x0, dx, xi):
    """Vectorized 4-point Lagrange interpolation on a uniform grid."""
    m = vgrid.shape[0]
    j = np.floor((xi - x0) / dx).astype(np.int64)
    j = np.clip(j, 1, m - 3)
    t = (xi - x0) / dx - j
    w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w_0 = (t * t - 1.0) * (t - 2.0) / 2.0
    w_p1 = -t * (t + 1.0) * (t - 2.0) / 2.0
    w_p2 = t * (t * t - 1.0) / 6.0
    val = (w_m1 * vgrid[j - 1] + w_0 * vgrid[j] + w_p1 * vgrid[j + 1]
           + w_p2 * vgrid[j + 2])
    dw_m1 = -(3.0 * t * t - 6.0 * t + 2.0) / 6.0
    dw_0 = (3.0 * t * t - 4.0 * t - 1.0) / 2.0
    dw_p1 = -(3.0 * t * t - 2.0 * t - 2.0) / 2.0
    dw_p2 = (3.0 * t * t - 1.0) / 6.0
    der = (dw_m1 * vgrid[j - 1] + dw_0 * vgrid[j] + dw_p1 * vgrid[j + 1]
           + dw_p2 * vgrid[j + 2]) / dx
    return val, der


def _height_roots_1d_numpy(x, u, v0, vgrid, x0, dx, s_lo, s_hi,
                           n_scan, restol, max_iter):
    n = x.shape[0]
    h = np.zeros(n)
    status = np.full(n, ROOT_NONE, dtype=np.int64)

    s_ladder = np.linspace(s_lo, s_hi, n_scan)
    # phi(k, s) = v(x_k - u_k s) - (1 + s) v0_k  on the scan ladder
    xi = x[:, None] - u[:, None] * s_ladder[None, :]
    phi, _ = _cubic_eval_numpy(vgrid, x0, dx, xi.ravel())
    phi = phi.reshape(n, n_scan) - (1.0 + s_ladder[None, :]) * v0[:, None]

    sign = np.sign(phi)
    # count strict sign changes per node
    flips = (sign[:, :-1] * sign[:, 1:]) < 0
    n_flips = flips.sum(axis=1)

    exact = np.argmin(np.abs(phi), axis=1)
    on_node = np.abs(phi[np.arange(n), exact]) <= restol
    status[(n_flips == 0) & on_node] = ROOT_OK
    h[(n_flips == 0) & on_node] = s_ladder[exact[(n_flips == 0) & on_node]]
    status[n_flips > 1] = ROOT_MULTIPLE

    todo = np.where(n_flips == 1)[0]
    if todo.size:
        first = np.argmax(flips[todo], axis=1)
        lo = s_ladder[first]
        hi = s_ladder[first + 1]
        philo = phi[todo, first]
        s = 0.5 * (lo + hi)
        for _ in range(max_iter):
            val, der = _cubic_eval_numpy(vgrid, x0, dx, x[todo] - u[todo] * s)
            f = val - (1.0 + s) * v0[todo]
            fp = -der * u[todo] - v0[todo]
            shrink_hi = (f * philo) < 0
            hi = np.where(shrink_hi, s, hi)
            lo = np.where(shrink_hi, lo, s)
            with np.errstate(divide="ignore", invalid="ignore"):
                s_newton = s - f / fp
            inside = (s_newton > lo) & (s_newton < hi) & np.isfinite(s_newton)
            s = np.where(inside, s_newton, 0.5 * (lo + hi))
            if np.all((np.abs(f) <= restol) | (hi - lo <= 1e-15)):
                break
        h[todo] = s
        status[todo] = ROOT_OK
    return h, status


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _apply_stencil_numba(values, cols, wts):
        n, s = cols.shape
        out = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for k in range(s):
                acc += wts[i, k] * values[cols[i, k]]
            out[i] = acc
        return out

    @njit(cache=True)
    def _cubic_point(vgrid, x0, dx, xi):
        m = vgrid.shape[0]
        j = int(np.floor((xi - x0) / dx))
        if j < 1:
            j = 1
        if j > m - 3:
            j = m - 3
        t = (xi - x0) / dx - j
        val = (-t * (t - 1.0) * (t - 2.0) / 6.0 * vgrid[j - 1]
               + (t * t - 1.0) * (t - 2.0) / 2.0 * vgrid[j]
               - t * (t + 1.0) * (t - 2.0) / 2.0 * vgrid[j + 1]
               + t * (t * t - 1.0) / 6.0 * vgrid[j + 2])
        der = (-(3.0 * t * t - 6.0 * t + 2.0) / 6.0 * vgrid[j - 1]
               + (3.0 * t * t - 4.0 * t - 1.0) / 2.0 * vgrid[j]
               - (3.0 * t * t - 2.0 * t - 2.0) / 2.0 * vgrid[j + 1]
               + (3.0 * t * t - 1.0) / 6.0 * vgrid[j + 2]) / dx
        return val, der

    @njit(cache=True, parallel=True)
    def _height_roots_1d_numba(x, u, v0, vgrid, x0, dx, s_lo, s_hi,
                               n_scan, restol, max_iter):
        n = x.shape[0]
        h = np.zeros(n)
        status = np.full(n, ROOT_NONE, dtype=np.int64)
        ds = (s_hi - s_lo) / (n_scan - 1)
        for i in prange(n):
            # scan the tube for sign changes of phi(s)
            n_flips = 0
            first = -1
            best = 1e300
            best_s = 0.0
            prev = 0.0
            for k in range(n_scan):
                s = s_lo + k * ds
                val, _ = _cubic_point(vgrid, x0, dx, x[i] - u[i] * s)
                f = val - (1.0 + s) * v0[i]
                af = abs(f)
                if af < best:
                    best = af
                    best_s = s
                if k > 0 and prev * f < 0.0:
                    n_flips += 1
                    if first < 0:
                        first = k - 1
                prev = f
            if n_flips == 0:
                if best <= restol:
                    h[i] = best_s
                    status[i] = ROOT_OK
                continue
            if n_flips > 1:
                status[i] = ROOT_MULTIPLE
                continue
            lo = s_lo + first * ds
            hi = lo + ds
            vlo, _ = _cubic_point(vgrid, x0, dx, x[i] - u[i] * lo)
            philo = vlo - (1.0 + lo) * v0[i]
            s = 0.5 * (lo + hi)
            for _ in range(max_iter):
                val, der = _cubic_point(vgrid, x0, dx, x[i] - u[i] * s)
                f = val - (1.0 + s) * v0[i]
                if abs(f) <= restol or (hi - lo) <= 1e-15:
                    break
                if f * philo < 0.0:
                    hi = s
                else:
                    lo = s
                fp = -der * u[i] - v0[i]
                if fp != 0.0:
                    sn = s - f / fp
                    if lo < sn < hi:
                        s = sn
                    else:
                        s = 0.5 * (lo + hi)
                else:
                    s = 0.5 * (lo + hi)
            h[i] = s
            status[i] = ROOT_OK
        return h, status

    apply_stencil = _apply_stencil_numba
    height_roots_1d = _height_roots_1d_numba
else:
    apply_stencil = _apply_stencil_numpy
    height_roots_1d = _height_roots_1d_numpy
