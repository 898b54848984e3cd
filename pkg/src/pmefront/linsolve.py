"""Degenerate linear parabolic solves with zero initial data and no boundary rows.

The equation w_t = a^{ij} w_ij + b^i w_i + f w + g carries no boundary
condition: every row of the implicit system discretizes the PDE itself,
with one-sided stencils at boundary nodes.  A theta-method steps in time
(backward Euler by default for degenerate runs, theta = 1/2 for convergence
studies); time-dependent coefficients are sampled at t + theta dt.

Solvability is gated on the structure-condition report: the step refuses
unless the coefficients certify A1 + A2 + B (B'' instead of B in one
dimension), or the caller forces.

The optional 1D regularization adds an order-2N elliptic term with boundary
conditions only on the normal derivatives of orders N..2N-1, scaled by the
squared partition-of-unity cutoffs; as epsilon -> 0 the extra boundary
conditions lose their influence.  The dissipative orientation
eps * (-1)^{N+1} D^{2N} is used for both N = 1 (classical viscosity
+eps w_xx) and N = 2 (hyperviscosity -eps w_xxxx).

Weighted energies I_k (boundary-distance weight on normal derivatives,
plain tangential and interior terms, squared cutoffs) are recorded along
every run, together with the smallest exponential rate C that makes
e^{-Ct} (I_1 + 1) nonincreasing on the discrete trace.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import build_charts
from .errors import (CollarUnderResolved, ConfigInvalid, LinearSolveFailed,
                     PreconditionRefused)
from .fichera import check_conditions
from .fields import (DiskGrid, IntervalGrid, RadialGrid, ScalarField,
                     directional_derivative_in_Y, fd_weights)


@dataclass
class LinearRunConfig:
    dt: float
    T: float
    theta: float = 1.0
    order: int = 2
    epsilon: float = 0.0
    N_reg: int = 1
    force: bool = False
    t_start: float = 0.0
    store_stride: int = 1
    energy_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ConfigInvalid("dt and T must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigInvalid("theta must lie in [0.5, 1]")
        if self.epsilon < 0:
            raise ConfigInvalid("epsilon must be nonnegative")
        if self.epsilon > 0 and self.N_reg not in (1, 2):
            raise ConfigInvalid("regularization order N must be 1 or 2")


@dataclass
class EnergyTrace:
    ts: list = field(default_factory=list)
    I0: list = field(default_factory=list)
    I1: list = field(default_factory=list)
    I2: list = field(default_factory=list)

    def append(self, t, i0, i1, i2):
        self.ts.append(t)
        self.I0.append(i0)
        self.I1.append(i1)
        self.I2.append(i2)

    def fitted_gronwall_C(self):
        """Smallest C >= 0 with e^{-Ct}(I1 + 1) nonincreasing on the trace."""
        ts = np.asarray(self.ts)
        I1 = np.asarray(self.I1)
        if len(ts) < 2:
            return 0.0
        rates = np.diff(np.log(I1 + 1.0)) / np.diff(ts)
        return float(max(0.0, rates.max()))


# --------------------------------------------------------------------------
# operator assembly
# --------------------------------------------------------------------------

def build_operator(grid, snap, p=2):
    """Sparse matrix of a^{ij} d_ij + b^i d_i + f, PDE rows at every node."""
    a, b, f = snap.a, snap.b, snap.f
    D = lambda v: sp.diags(v)
    if isinstance(grid, IntervalGrid):
        return (D(a[:, 0, 0]) @ grid.deriv_csr("d2", p)
                + D(b[:, 0]) @ grid.deriv_csr("d1", p) + D(f))
    if isinstance(grid, RadialGrid):
        n = grid.dim
        r = grid.points
        a_rr = a[:, 0, 0]
        a_tt = a[:, 1, 1] if n > 1 else np.zeros_like(a_rr)
        coef2 = a_rr.copy()
        coef1 = b[:, 0].copy()
        if n > 1:
            # a^{ij} w_ij = a_rr w'' + (n-1) a_tt w'/r; at r = 0 the
            # tangential part tends to (n-1) a_tt(0) w''(0)
            coef1[1:] += (n - 1) * a_tt[1:] / r[1:]
            coef2[0] += (n - 1) * a_tt[0]
        return (D(coef2) @ grid.deriv_csr("d2", p)
                + D(coef1) @ grid.deriv_csr("d1", p) + D(f))
    if isinstance(grid, DiskGrid):
        return (D(a[:, 0, 0]) @ grid.deriv_csr("dxx", p)
                + 2.0 * (D(a[:, 0, 1]) @ grid.deriv_csr("dxy", p))
                + D(a[:, 1, 1]) @ grid.deriv_csr("dyy", p)
                + D(b[:, 0]) @ grid.deriv_csr("dx", p)
                + D(b[:, 1]) @ grid.deriv_csr("dy", p) + D(f))
    raise ConfigInvalid(f"unsupported grid {type(grid).__name__}")


def _condition_estimate(M):
    n = M.shape[0]
    if n <= 1200:
        try:
            return float(np.linalg.cond(M.toarray()))
        except np.linalg.LinAlgError:
            return float("inf")
    return float(spla.onenormest(M))


def _verify_residual(M, x, rhs):
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailed(
            "solver returned non-finite values",
            condition_estimate=_condition_estimate(M))
    resid = np.abs(M @ x - rhs).max()
    scale = max(np.abs(rhs).max(), np.abs(x).max(), 1e-300)
    if resid > 1e-8 * scale:
        raise LinearSolveFailed(
            f"solve residual {resid:.3e} exceeds 1e-8 * {scale:.3e} "
            "(singular or severely ill-conditioned system)",
            condition_estimate=_condition_estimate(M))
    return x


def _solve_1d_banded(M, rhs):
    dia = M.todia()
    lo = int(max(0, -dia.offsets.min()))
    up = int(max(0, dia.offsets.max()))
    n = M.shape[0]
    ab = np.zeros((lo + up + 1, n))
    for off, row in zip(dia.offsets, dia.data):
        ab[up - off, :] = row
    try:
        with np.errstate(all="ignore"):
            x = scipy.linalg.solve_banded((lo, up), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise LinearSolveFailed(
            f"banded solve failed: {exc}",
            condition_estimate=_condition_estimate(M)) from exc
    return _verify_residual(M, x, rhs)


def _solve_2d_ilu(M, rhs):
    """Iterative solve with incomplete-LU preconditioning."""
    Mc = M.tocsc()
    try:
        ilu = spla.spilu(Mc, drop_tol=1e-6, fill_factor=20)
    except RuntimeError as exc:
        raise LinearSolveFailed(
            f"incomplete factorization failed: {exc}",
            condition_estimate=_condition_estimate(M)) from exc
    prec = spla.LinearOperator(M.shape, ilu.solve)
    x, info = spla.lgmres(Mc, rhs, M=prec, rtol=1e-12, atol=1e-14,
                          maxiter=400)
    if info != 0:
        raise LinearSolveFailed(
            f"lgmres did not converge (info={info})",
            condition_estimate=_condition_estimate(M))
    return _verify_residual(M, x, rhs)


def solve_implicit(grid, M, rhs):
    if isinstance(grid, (IntervalGrid, RadialGrid)):
        return _solve_1d_banded(M, rhs)
    return _solve_2d_ilu(M, rhs)


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------

def _regularization(grid, cfg):
    """(-1)^{N+1} eps (sum_l xi_l^2) D^{2N} plus the constraint row data."""
    if cfg.epsilon == 0.0:
        return None, []
    if not isinstance(grid, IntervalGrid):
        raise ConfigInvalid("regularized runs are 1D only")
    N = cfg.N_reg
    charts, pou = build_charts(grid.domain)
    xi = pou.values(grid.points)
    xi2 = (xi ** 2).sum(axis=0)
    sign = (-1.0) ** (N + 1)
    Lreg = sign * cfg.epsilon * sp.diags(xi2) @ grid.deriv_csr(
        {2: "d2", 4: "d4"}[2 * N], cfg.order)
    # boundary constraints d^j w = 0, j = N..2N-1, one row per endpoint node
    rows = []
    nx = grid.nx
    for side, xend in ((0, grid.points[0]), (1, grid.points[-1])):
        for q, j in enumerate(range(N, 2 * N)):
            node = q if side == 0 else nx - 1 - q
            w = j + cfg.order
            idx = np.arange(w) if side == 0 else np.arange(nx - w, nx)
            wts = fd_weights(xend, grid.points[idx], j)[j]
            rows.append((node, idx, wts))
    return Lreg, rows


class LinearSolver:
    """Owns one run's mutable state; independent runs are independent."""

    def __init__(self, coeffs, cfg, report=None):
        self.coeffs = coeffs
        self.cfg = cfg
        self.grid = coeffs.grid
        if report is None:
            report = check_conditions(coeffs, self.grid.domain, cfg.t_start,
                                      p=cfg.order)
        self.report = report
        if not report.passes_gate(self.grid.dim) and not cfg.force:
            need = "A1+A2+B" if self.grid.dim >= 2 else "A1+A2+B''"
            raise PreconditionRefused(
                f"structure conditions not certified (need {need}, "
                f"classification: {report.classification!r})")
        self._Lreg, self._constraints = _regularization(self.grid, cfg)
        self._cached = None

    def _system(self, t_mid):
        cfg = self.cfg
        if self._cached is not None:
            return self._cached
        snap = self.coeffs.at(t_mid)
        L = build_operator(self.grid, snap, cfg.order)
        if self._Lreg is not None:
            L = L + self._Lreg
        I = sp.identity(self.grid.n_nodes, format="csr")
        M = (I - cfg.theta * cfg.dt * L).tolil()
        for node, idx, wts in self._constraints:
            M.rows[node] = list(map(int, idx))
            M.data[node] = list(map(float, wts))
        M = M.tocsr()
        system = (M, L)
        if self.coeffs.matrix_time_independent:
            self._cached = system
        return system

    def step(self, w, t):
        """One theta-method step from t to t + dt."""
        cfg = self.cfg
        t_mid = t + cfg.theta * cfg.dt
        M, L = self._system(t_mid)
        snap = self.coeffs.at(t_mid)
        g = snap.g if snap.g is not None else 0.0
        rhs = w + (1.0 - cfg.theta) * cfg.dt * (L @ w) + cfg.dt * g
        for node, _, _ in self._constraints:
            rhs[node] = 0.0
        return solve_implicit(self.grid, M, rhs)


def step_linear(coeffs, w_field, t, cfg, report=None):
    """Single step of the unregularized problem (*the* PDE at every row)."""
    cfg_plain = cfg if cfg.epsilon == 0.0 else _without_regularization(cfg)
    solver = LinearSolver(coeffs, cfg_plain, report)
    out = solver.step(np.asarray(w_field.values, dtype=float), t)
    return ScalarField(w_field.grid, out, t=t + cfg.dt)


def step_regularized_1d(coeffs, w_field, t, cfg, report=None):
    """Single step of the order-2N regularized problem (eps = 0 matches
    step_linear exactly: the constraint rows are tied to the term)."""
    solver = LinearSolver(coeffs, cfg, report)
    out = solver.step(np.asarray(w_field.values, dtype=float), t)
    return ScalarField(w_field.grid, out, t=t + cfg.dt)


def _without_regularization(cfg):
    return LinearRunConfig(dt=cfg.dt, T=cfg.T, theta=cfg.theta,
                           order=cfg.order, epsilon=0.0, force=cfg.force,
                           t_start=cfg.t_start, store_stride=cfg.store_stride,
                           energy_stride=cfg.energy_stride)


@dataclass
class LinearRun:
    ts: list
    snapshots: list           # [(t, values)] at the store stride
    w_final: np.ndarray
    energy: EnergyTrace
    report: object
    gronwall_C: float


def solve_linear(coeffs, cfg, charts=None, partition=None, w0=None,
                 report=None):
    """March w(., 0) = 0 to T, recording snapshots and the energies I_k."""
    grid = coeffs.grid
    if charts is None or partition is None:
        charts, partition = build_charts(grid.domain)
    solver = LinearSolver(coeffs, cfg, report)
    w = np.zeros(grid.n_nodes) if w0 is None else np.asarray(w0, dtype=float)
    t = cfg.t_start
    n_steps = int(round(cfg.T / cfg.dt))
    trace = EnergyTrace()
    snapshots = [(t, w.copy())]
    ts = [t]
    trace.append(t, *(energy_I_k(ScalarField(grid, w), grid.domain, charts,
                                 partition, k, p=cfg.order)
                      for k in (0, 1, 2)))
    for step in range(1, n_steps + 1):
        w = solver.step(w, t)
        t = cfg.t_start + step * cfg.dt
        ts.append(t)
        if step % cfg.energy_stride == 0 or step == n_steps:
            trace.append(t, *(energy_I_k(ScalarField(grid, w), grid.domain,
                                         charts, partition, k, p=cfg.order)
                              for k in (0, 1, 2)))
        if step % cfg.store_stride == 0 or step == n_steps:
            snapshots.append((t, w.copy()))
    return LinearRun(ts, snapshots, w, trace, solver.report,
                     trace.fitted_gronwall_C())


# --------------------------------------------------------------------------
# weighted energies
# --------------------------------------------------------------------------

def _tangential_theta_power(grid, values, k, halfwidth, p):
    """(Theta d_theta)^k of a disk field (chart X-derivative)."""
    out = values
    for _ in range(k):
        out = grid._theta_table(1, p).apply(out) * halfwidth
    return out


def energy_I_k(w_field, domain, charts, partition, k, p=2,
               return_parts=False):
    """Discrete quadrature of the weighted energy I_k, k <= 2.

    I_k = int w^2 + sum_charts int ((-Y)(D_Y^k w)^2 + sum_{|alpha|=k}
    (D_X^alpha w)^2) xi^2 dY dX + int_interior sum_{|a|=k} (D^a w)^2 xi_0^2.
    Chart integrals run in chart coordinates (unit-spaced X in (-1,1), Y the
    negative boundary distance).  ``return_parts`` also gives the
    (l2, collar, interior) breakdown.
    """
    if k > 2:
        raise CollarUnderResolved("energies implemented for k <= 2")
    grid = w_field.grid
    w = w_field.values
    xi = partition.values(grid.points)
    l2_part = float(np.sum(grid.quad_weights * w * w))
    total = l2_part
    collar_part = 0.0

    d = -np.minimum(domain.signed_distance(grid.points), 0.0)
    c0 = domain.collar_width

    for ci, chart in enumerate(charts):
        if k == 0:
            dYk = w
        else:
            f, _ = directional_derivative_in_Y(w_field, chart, k, p)
            dYk = f.values
        mask = np.asarray(chart.contains(grid.points)).reshape(-1)
        xi2 = xi[ci + 1] ** 2
        if isinstance(grid, (IntervalGrid, RadialGrid)):
            dY = grid.h
            contrib = np.sum((d * dYk ** 2)[mask] * xi2[mask]) * dY
            if k == 0:
                contrib += np.sum((w ** 2)[mask] * xi2[mask]) * dY
            total += float(contrib)
            collar_part += float(contrib)
        elif isinstance(grid, DiskGrid):
            dY = grid.dr
            dX = grid.dtheta / chart.halfwidth
            cell = dY * dX
            contrib = np.sum((d * dYk ** 2)[mask] * xi2[mask]) * cell
            tang = _tangential_theta_power(grid, w, k, chart.halfwidth, p)
            contrib += np.sum((tang ** 2)[mask] * xi2[mask]) * cell
            total += float(contrib)
            collar_part += float(contrib)
        else:
            raise CollarUnderResolved("no collar quadrature for this grid")
        if int(c0 / (grid.h if not isinstance(grid, DiskGrid) else grid.dr)) \
                < 2 * k + 2:
            raise CollarUnderResolved("collar under-resolved for the energy")

    # interior term with xi_0^2 against the ambient volume measure
    xi0sq = xi[0] ** 2
    if k == 0:
        interior = w * w
    elif isinstance(grid, (IntervalGrid, RadialGrid)):
        interior = grid.deriv(w, k, p) ** 2
    else:
        if k == 1:
            gx = grid.deriv_csr("dx", p) @ w
            gy = grid.deriv_csr("dy", p) @ w
            interior = gx * gx + gy * gy
        else:
            xx = grid.deriv_csr("dxx", p) @ w
            xy = grid.deriv_csr("dxy", p) @ w
            yy = grid.deriv_csr("dyy", p) @ w
            interior = xx * xx + xy * xy + yy * yy
    interior_part = float(np.sum(grid.quad_weights * xi0sq * interior))
    total += interior_part
    if return_parts:
        return total, {"l2": l2_part, "collar": collar_part,
                       "interior": interior_part}
    return total
