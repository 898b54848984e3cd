"""Fixed-domain transformation of the pressure free-boundary problem.

The moving positivity set is pulled back to the initial region by a height
function h(x, t): each point of the evolving pressure graph is reached from
(x, v0(x)) along the transversal segment s -> (x, v0(x)) + s * (-grad v0, v0),
and h is the segment parameter where the graph is met, so

    (1 + h(x, t)) v0(x) = v(x - grad v0(x) h(x, t), t).

Differentiating that relation turns the pressure evolution
v_t = (m-1) v lap v + |grad v|^2 into a second-order equation h_t = F(h, x)
on the fixed region, with no boundary conditions.  This module evaluates F,
its exact linearization L (coefficients a^{ij}, b^i, f obtained by
differentiating the closed-form F with respect to (h, grad h, hess h) --
no finite differencing), the nodewise matrix A = C^{-1} with
C_ik = delta_ik - h_i v0_k - h v0_ik, height recovery from pressure
snapshots, and front reconstruction.

Index convention: A is stored as A[node, j, i] = A^{ji}, the matrix inverse
of C[node, i, k] = C_ik, so that sum_i A^{ji} C_ik = delta_jk.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (DegenerateData, MultipleRoots, NonpositiveDenominator,
                     NoRootInTube, SingularC, TubeExceeded)
from .fields import DiskGrid, IntervalGrid, RadialGrid, ScalarField


# --------------------------------------------------------------------------
# ambient derivative bundles
# --------------------------------------------------------------------------

def _radial_ratio(grid, num, r):
    """Stabilized f'(r)/r-type ratios: odd/odd near the center."""
    out = np.empty_like(num)
    ok = r > 2.5 * grid.h
    out[ok] = num[ok] / r[ok]
    # the ratio is smooth and even; extrapolate the inner nodes from a
    # linear fit through the origin of the odd numerator
    fit = (r > 2.5 * grid.h) & (r < 6.5 * grid.h)
    slope = np.mean(num[fit] / r[fit]) if np.any(fit) else 0.0
    out[~ok] = slope
    return out


def ambient_scalar_bundle(grid, values, p=2):
    """(value, gradient, hessian) of a sampled scalar as ambient-n tensors.

    Interval and disk grids differentiate directly; on a radial grid the
    ambient tensors of the rotationally symmetric function are rebuilt from
    radial derivatives with the first axis aligned to the radial direction.
    """
    n = grid.dim
    N = grid.n_nodes
    if isinstance(grid, (IntervalGrid, DiskGrid)):
        g = grid.gradient(values, p).reshape(N, n)
        H = grid.hessian(values, p).reshape(N, n, n)
        return values, g, H
    if isinstance(grid, RadialGrid):
        r = grid.points
        fr = grid.deriv(values, 1, p)
        frr = grid.deriv(values, 2, p)
        g = np.zeros((N, n))
        g[:, 0] = fr
        tang = _radial_ratio(grid, fr, r)
        H = np.zeros((N, n, n))
        for k in range(1, n):
            H[:, k, k] = tang
        H[:, 0, 0] = frr
        return values, g, H
    raise TypeError(f"unsupported grid {type(grid).__name__}")


def ambient_third(grid, values, p=2):
    """Fully symmetrized ambient third-derivative tensor."""
    n = grid.dim
    N = grid.n_nodes
    if isinstance(grid, IntervalGrid):
        return grid.deriv(values, 3, p).reshape(N, 1, 1, 1)
    if isinstance(grid, DiskGrid):
        return grid.third(values, p)
    if isinstance(grid, RadialGrid):
        r = grid.points
        fr = grid.deriv(values, 1, p)
        frr = grid.deriv(values, 2, p)
        frrr = grid.deriv(values, 3, p)
        q = _radial_ratio(grid, frr * r - fr, r)   # f''/r - f'/r^2, times r
        q = _radial_ratio(grid, q, r)
        e = np.zeros(n)
        e[0] = 1.0
        I = np.eye(n)
        T = (frrr[:, None, None, None] * np.einsum("i,j,k->ijk", e, e, e)
             + q[:, None, None, None]
             * (np.einsum("i,jk->ijk", e, I) + np.einsum("j,ik->ijk", e, I)
                + np.einsum("k,ij->ijk", e, I)
                - 3.0 * np.einsum("i,j,k->ijk", e, e, e)))
        return T
    raise TypeError(f"unsupported grid {type(grid).__name__}")


@dataclass
class V0Data:
    """Ambient derivatives of the initial pressure, analytic when available."""

    values: np.ndarray     # (N,)
    grad: np.ndarray       # (N, n)
    hess: np.ndarray       # (N, n, n)
    third: np.ndarray      # (N, n, n, n)

    @classmethod
    def from_grid_fd(cls, grid, values, p=4):
        v, g, H = ambient_scalar_bundle(grid, values, p)
        return cls(values, g, H, ambient_third(grid, values, p))


# --------------------------------------------------------------------------
# problem and state
# --------------------------------------------------------------------------

class PMEProblem:
    """Exponent m, initial pressure v0 on a grid, and the domain geometry.

    v0 must be positive at interior nodes and zero at boundary nodes (tiny
    boundary residue from rounding is snapped to exact zero), and
    nondegenerate: min(v0 + |grad v0|^2) = c_floor > 0.
    """

    def __init__(self, m, v0, v0_data=None, tube_radius=None, p_v0=4):
        if m <= 1:
            raise DegenerateData(f"exponent must satisfy m > 1, got {m}")
        grid = v0.grid
        vals = v0.values.copy()
        scale = float(np.max(np.abs(vals))) or 1.0
        bidx = grid.boundary_idx
        if np.any(np.abs(vals[bidx]) > 1e-8 * scale):
            raise DegenerateData("v0 does not vanish on the boundary")
        vals[bidx] = 0.0
        inner = grid.interior_mask()
        if np.any(vals[inner] <= 0.0):
            raise DegenerateData("v0 must be positive at interior nodes")
        self.m = float(m)
        self.grid = grid
        self.domain = grid.domain
        self.v0 = ScalarField(grid, vals, t=0.0)
        if v0_data is None:
            v0_data = V0Data.from_grid_fd(grid, vals, p=p_v0)
        else:
            v0_data = V0Data(vals, v0_data.grad, v0_data.hess, v0_data.third)
        self.v0_data = v0_data
        gn2 = np.einsum("xi,xi->x", v0_data.grad, v0_data.grad)
        self.c_floor = float(np.min(vals + gn2))
        if self.c_floor <= 1e-12 * max(scale, 1.0):
            raise DegenerateData(
                f"nondegeneracy floor min(v0 + |grad v0|^2) = {self.c_floor:.3e}")
        if tube_radius is None:
            hnorm = np.linalg.norm(v0_data.hess, ord=2, axis=(1, 2))
            tube_radius = 0.25 * self.c_floor / max(float(hnorm.max()), 1e-12)
        self.tube_radius = float(tube_radius)

    @property
    def dim(self):
        return self.grid.dim


class HState:
    """Height function snapshot: h on the problem grid at time t.

    Inside the admissible tube |h| < tube_radius; h is identically zero at
    t = 0.
    """

    def __init__(self, h, t, tube_radius):
        if isinstance(h, ScalarField):
            grid, values = h.grid, h.values
        else:
            raise TypeError("h must be a ScalarField")
        hmax = float(np.max(np.abs(values)))
        if hmax >= tube_radius:
            raise TubeExceeded(
                f"|h| = {hmax:.4g} exceeds the tube radius {tube_radius:.4g}")
        if t == 0.0 and hmax != 0.0:
            raise TubeExceeded("h must vanish identically at t = 0")
        self.grid = grid
        self.h = ScalarField(grid, values, t=t)
        self.t = float(t)
        self.tube_radius = float(tube_radius)

    @classmethod
    def zero(cls, problem, t=0.0):
        z = ScalarField(problem.grid, np.zeros(problem.grid.n_nodes), t=t)
        return cls(z, t, problem.tube_radius)

    def with_values(self, values, t):
        return HState(ScalarField(self.grid, values, t=t), t, self.tube_radius)


@dataclass
class TransformState:
    """Nodewise cache of the transformation at a fixed (h, t)."""

    problem: object
    hstate: object
    s: np.ndarray          # h values
    p: np.ndarray          # grad h, ambient (N, n)
    H: np.ndarray          # hess h, ambient (N, n, n)
    C: np.ndarray          # (N, n, n), C[x, i, k]
    A: np.ndarray          # (N, n, n), A[x, j, i] = A^{ji}
    detC: np.ndarray
    dA: np.ndarray         # (N, n, n, n): dA[x, k, j, i] = d_k A^{ji}
    G: np.ndarray          # (N, n, n, n): G[x, r, l, k]
    P: np.ndarray          # (N, n)
    D: np.ndarray          # (N,) positive denominator
    grad_v: np.ndarray     # (N, n): pressure gradient at the mapped point


def assemble_A(problem, hstate, p=2):
    """Invert C = I - grad h (x) grad v0 - h hess v0 nodewise (Eq. A*C = I)."""
    grid = problem.grid
    n = problem.dim
    d = problem.v0_data
    s = hstate.h.values
    _, ph, Hh = ambient_scalar_bundle(grid, s, p)
    u, U, T = d.grad, d.hess, d.third
    I = np.eye(n)
    C = (I[None, :, :] - np.einsum("xi,xk->xik", ph, u)
         - s[:, None, None] * U)
    detC = np.linalg.det(C)
    bad = np.abs(detC) < 1e-12
    if np.any(bad):
        node = int(np.argmax(bad))
        raise SingularC(
            f"|det C| = {abs(detC[node]):.3e} at node {node}", node=node)
    A = np.linalg.inv(C)
    G = (np.einsum("xrk,xl->xrlk", Hh, u)
         + np.einsum("xr,xlk->xrlk", ph, U)
         + np.einsum("xk,xrl->xrlk", ph, U)
         + s[:, None, None, None] * T)
    dA = np.einsum("xli,xjr,xrlk->xkji", A, A, G)
    P = (1.0 + s)[:, None] * u + ph * d.values[:, None]
    grad_v = np.einsum("xji,xi->xj", A, P)
    D = d.values + np.einsum("xij,xj,xi->x", A, P, u)
    if np.any(D <= 0.0):
        node = int(np.argmin(D))
        raise NonpositiveDenominator(
            f"denominator {D[node]:.3e} at node {node}", node=node)
    return TransformState(problem, hstate, s, ph, Hh, C, A, detC, dA, G, P,
                          D, grad_v)


def transversal_field(problem, c_min=None):
    """V = (-grad v0, v0) per node; parallel to y = 0 on the boundary."""
    if c_min is not None and problem.c_floor < c_min:
        raise DegenerateData(
            f"nondegeneracy floor {problem.c_floor:.3e} below c_min={c_min:.3e}")
    V = np.concatenate([-problem.v0_data.grad,
                        problem.v0_data.values[:, None]], axis=1)
    return V


# --------------------------------------------------------------------------
# the nonlinear operator F and its exact linearization
# --------------------------------------------------------------------------

def _F_parts(st, m):
    """(Delta v, |grad v|^2, F) from a TransformState."""
    d = st.problem.v0_data
    s, ph, Hh = st.s, st.p, st.H
    u, U = d.grad, d.hess
    M = ((1.0 + s)[:, None, None] * U
         + np.einsum("xk,xi->xik", ph, u) + np.einsum("xi,xk->xik", ph, u)
         + Hh * d.values[:, None, None])
    AtA = np.einsum("xjk,xji->xki", st.A, st.A)
    lap_v = (np.einsum("xki,xik->x", AtA, M)
             + np.einsum("xkr,xrlk,xl->x", AtA, st.G, st.grad_v))
    grad_v2 = np.einsum("xj,xj->x", st.grad_v, st.grad_v)
    F = ((m - 1.0) * (1.0 + s) * d.values * lap_v + grad_v2) / st.D
    return M, AtA, lap_v, grad_v2, F


def evaluate_F(problem, hstate, p=2, state=None):
    """Right-hand side of h_t = F(h, x), finite up to the boundary."""
    st = state if state is not None else assemble_A(problem, hstate, p)
    _, _, _, _, F = _F_parts(st, problem.m)
    return ScalarField(problem.grid, F, t=hstate.t)


def _dF_exact(st, m, omega, q, W):
    """Directional derivative of F in the direction (w, grad w, hess w).

    omega (N,), q (N, n), W (N, n, n) are the pointwise values of the
    direction; the result is the exact derivative of the closed-form F,
    assembled by the chain rule through C^-1 -- no finite differencing.
    """
    d = st.problem.v0_data
    v0, u, U, T = d.values, d.grad, d.hess, d.third
    s, ph = st.s, st.p
    A, G, P, D, v = st.A, st.G, st.P, st.D, st.grad_v

    M, AtA, lap_v, grad_v2, F = _F_parts(st, m)

    dC = -(np.einsum("xi,xk->xik", q, u) + omega[:, None, None] * U)
    dA = -np.einsum("xjr,xrl,xli->xji", A, dC, A)
    dP = omega[:, None] * u + q * v0[:, None]
    dM = (omega[:, None, None] * U
          + np.einsum("xk,xi->xik", q, u) + np.einsum("xi,xk->xik", q, u)
          + W * v0[:, None, None])
    dG = (np.einsum("xrk,xl->xrlk", W, u)
          + np.einsum("xr,xlk->xrlk", q, U)
          + np.einsum("xk,xrl->xrlk", q, U)
          + omega[:, None, None, None] * T)
    dv = np.einsum("xji,xi->xj", dA, P) + np.einsum("xji,xi->xj", A, dP)
    dAtA = (np.einsum("xjk,xji->xki", dA, A)
            + np.einsum("xjk,xji->xki", A, dA))

    dlap = (np.einsum("xki,xik->x", dAtA, M)
            + np.einsum("xki,xik->x", AtA, dM)
            + np.einsum("xkr,xrlk,xl->x", dAtA, G, v)
            + np.einsum("xkr,xrlk,xl->x", AtA, dG, v)
            + np.einsum("xkr,xrlk,xl->x", AtA, G, dv))
    dgrad2 = 2.0 * np.einsum("xj,xj->x", v, dv)
    dD = (np.einsum("xij,xj,xi->x", dA, P, u)
          + np.einsum("xij,xj,xi->x", A, dP, u))
    dnumer = ((m - 1.0) * v0 * (omega * lap_v + (1.0 + s) * dlap) + dgrad2)
    return (dnumer - F * dD) / D


def linearize_F(problem, hstate, p=2, state=None):
    """Coefficients (a^{ij}, b^i, f) of the linearization L of F at h.

    a^{ij} = (m-1)(1+h) v0 (A^T A)_{ij} in closed form -- every component
    carries the factor v0 and so vanishes identically on the boundary; b^i
    and f come from the exact directional-derivative assembly evaluated on
    coordinate directions.  g is supplied by the caller.
    """
    from .fichera import LinearCoefficients

    st = state if state is not None else assemble_A(problem, hstate, p)
    m = problem.m
    grid = problem.grid
    n = problem.dim
    N = grid.n_nodes
    AtA = np.einsum("xjk,xji->xki", st.A, st.A)
    a = (m - 1.0) * (1.0 + st.s)[:, None, None] * st.problem.v0_data.values[
        :, None, None] * AtA
    a = 0.5 * (a + np.transpose(a, (0, 2, 1)))

    zero_s = np.zeros(N)
    zero_q = np.zeros((N, n))
    zero_W = np.zeros((N, n, n))
    b = np.empty((N, n))
    for i in range(n):
        q = np.zeros((N, n))
        q[:, i] = 1.0
        b[:, i] = _dF_exact(st, m, zero_s, q, zero_W)
    f = _dF_exact(st, m, np.ones(N), zero_q, zero_W)
    return LinearCoefficients(grid, a, b, f, g=None, t0=hstate.t)


def linearize_F_fd(problem, hstate, w_values, tau=1e-6, p=2):
    """Finite-difference directional derivative of F (cross-check oracle).

    Returns (F(h + tau w) - F(h - tau w)) / (2 tau) as node values; kept
    independent of the closed-form coefficient evaluators.
    """
    hp = hstate.with_values(hstate.h.values + tau * w_values, hstate.t)
    hm = hstate.with_values(hstate.h.values - tau * w_values, hstate.t)
    Fp = evaluate_F(problem, hp, p).values
    Fm = evaluate_F(problem, hm, p).values
    return (Fp - Fm) / (2.0 * tau)


def apply_L(coeffs_snapshot, grid, w_values, p=2):
    """a^{ij} w_ij + b^i w_i + f w with grid finite differences."""
    _, gw, Hw = ambient_scalar_bundle(grid, w_values, p)
    a, b, f = coeffs_snapshot.a, coeffs_snapshot.b, coeffs_snapshot.f
    return (np.einsum("xij,xij->x", a, Hw) + np.einsum("xi,xi->x", b, gw)
            + f * w_values)


# --------------------------------------------------------------------------
# height from pressure snapshots, front reconstruction
# --------------------------------------------------------------------------

def h_from_v(v_snapshot, problem, t, tube=None, p=2, n_scan=81,
             max_iter=60):
    """Solve the implicit height relation per node along its segment.

    ``v_snapshot`` is either a callable v(points) -> values defined on a
    neighborhood of the segments (the smooth extension of the pressure
    across the front), or a pair (x_nodes, values) sampling it on a uniform
    superset 1D grid, interpolated cubically along segments.  The scan
    ladder brackets the root; zero sign changes raise NoRootInTube, more
    than one raises MultipleRoots.
    """
    grid = problem.grid
    tube = problem.tube_radius if tube is None else tube
    x = grid.points if grid.points.ndim == 1 else None
    u = problem.v0_data.grad
    v0 = problem.v0_data.values
    restol = 1e-10 * (v0 + np.einsum("xi,xi->x", u, u))

    if callable(v_snapshot):
        h, status = _height_roots_callable(v_snapshot, grid, u, v0, t, tube,
                                           n_scan, restol, max_iter)
    else:
        if x is None:
            raise TypeError("sampled snapshots need a 1D (interval/radial) grid")
        xg, vg = v_snapshot
        xg = np.asarray(xg, dtype=float)
        vg = np.asarray(vg, dtype=float)
        dxg = xg[1] - xg[0]
        if isinstance(grid, RadialGrid):
            # radial fields are even: extend the sample across r = 0
            xg = np.concatenate([-xg[:0:-1], xg])
            vg = np.concatenate([vg[:0:-1], vg])
        h, status = _kernels.height_roots_1d(
            np.ascontiguousarray(x, dtype=float),
            np.ascontiguousarray(u[:, 0], dtype=float),
            np.ascontiguousarray(v0, dtype=float),
            np.ascontiguousarray(vg, dtype=float), float(xg[0]), float(dxg),
            -tube, tube, n_scan, float(restol.min()), max_iter)

    if np.any(status == _kernels.ROOT_MULTIPLE):
        node = int(np.argmax(status == _kernels.ROOT_MULTIPLE))
        raise MultipleRoots(f"multiple height roots in the tube at node {node}")
    if np.any(status == _kernels.ROOT_NONE):
        node = int(np.argmax(status == _kernels.ROOT_NONE))
        raise NoRootInTube(f"no height root in the tube at node {node}")
    return HState(ScalarField(grid, h, t=t), t, tube)


def _segment_points(grid, u, s):
    """Spatial points x - grad v0 * s for a vector of per-node parameters."""
    if grid.points.ndim == 1:
        return grid.points - u[:, 0] * s
    return grid.points - u * s[:, None]


def _height_roots_callable(v_fn, grid, u, v0, t, tube, n_scan, restol,
                           max_iter):
    N = grid.n_nodes
    s_ladder = np.linspace(-tube, tube, n_scan)
    phi = np.empty((N, n_scan))
    for k, s in enumerate(s_ladder):
        pts = _segment_points(grid, u, np.full(N, s))
        phi[:, k] = v_fn(pts, t) - (1.0 + s) * v0
    sign = np.sign(phi)
    flips = (sign[:, :-1] * sign[:, 1:]) < 0
    nf = flips.sum(axis=1)
    status = np.full(N, _kernels.ROOT_NONE, dtype=int)
    h = np.zeros(N)
    near = np.abs(phi).min(axis=1) <= restol
    hit0 = (nf == 0) & near
    h[hit0] = s_ladder[np.abs(phi[hit0]).argmin(axis=1)]
    status[hit0] = _kernels.ROOT_OK
    status[nf > 1] = _kernels.ROOT_MULTIPLE
    todo = np.where(nf == 1)[0]
    if todo.size:
        first = flips[todo].argmax(axis=1)
        lo, hi = s_ladder[first], s_ladder[first + 1]
        flo = phi[todo, first]
        base = grid.points[todo]
        u_t, v0_t = u[todo], v0[todo]
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if base.ndim == 1:
                pts_mid = base - u_t[:, 0] * mid
            else:
                pts_mid = base - u_t * mid[:, None]
            fm = v_fn(pts_mid, t) - (1.0 + mid) * v0_t
            left = fm * flo < 0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
        h[todo] = 0.5 * (lo + hi)
        status[todo] = _kernels.ROOT_OK
    return h, status


@dataclass
class FrontSample:
    """Front points at one time plus the deformed-graph pressure."""

    t: float
    front_points: np.ndarray      # (B,) or (B, 2)
    boundary_idx: np.ndarray
    grad_v_front: np.ndarray      # |grad v| per front point
    deformed_points: np.ndarray   # all nodes mapped by x - grad v0 * h
    pressure: np.ndarray          # (1 + h) v0 at the deformed points


def reconstruct_front(problem, hstate, p=2, state=None):
    """Front points x - grad v0(x) h and pressure on the deformed graph."""
    st = state if state is not None else assemble_A(problem, hstate, p)
    grid = problem.grid
    u = problem.v0_data.grad
    h = hstate.h.values
    deformed = _segment_points(grid, u, h)
    pressure = (1.0 + h) * problem.v0_data.values
    bidx = grid.boundary_idx
    front = deformed[bidx]
    gv = np.linalg.norm(st.grad_v[bidx].reshape(len(bidx), -1), axis=1)
    return FrontSample(hstate.t, front, bidx, gv, deformed, pressure)
