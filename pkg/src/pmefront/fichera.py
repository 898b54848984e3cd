"""Certification of the boundary structure conditions for degenerate operators.

For coefficients (a^{ij}, b^i, f, g) of a second-order operator that
degenerates on the boundary, the report evaluates at every boundary node

    q1 = a^{ij} nu_i nu_j                (zero:     condition A1)
    q2 = (d_k a^{ij}) nu_k nu_i nu_j     (negative: condition A2)
    q3 = (b^i - d_j a^{ij}) nu_i         (<= 0: B,  < 0: B')
    q4 = b^i nu_i                        (<= 0: B'')

together with max_j |a^{ij} nu_i| (the Cauchy-Schwarz equivalent of A1).
Boundary derivatives use the one-sided stencils of :mod:`pmefront.fields`,
so coefficients are never evaluated outside the closed region.  The exact
sign conditions are certified up to tolerances scaled by the boundary
magnitude of the coefficient derivatives.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularJacobian
from .fields import DiskGrid, IntervalGrid, RadialGrid, fd_weights
from .transform import ambient_scalar_bundle


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------

@dataclass
class CoeffSnapshot:
    t: float
    a: np.ndarray            # (N, n, n)
    b: np.ndarray            # (N, n)
    f: np.ndarray            # (N,)
    g: np.ndarray = None     # (N,) or None


class LinearCoefficients:
    """Time-dependent coefficient bundle (a^{ij}, b^i, f, g) on a grid.

    Each entry is either a plain array (time-independent) or a callable of
    t returning node arrays.  (a^{ij}) must be symmetric everywhere and
    positive definite at interior nodes; this is verified at construction
    at the probe time t0.
    """

    def __init__(self, grid, a, b, f, g=None, t0=0.0, check=True):
        self.grid = grid
        self.n = grid.dim
        self._a, self._b, self._f, self._g = a, b, f, g
        self.t0 = t0
        if check:
            snap = self.at(t0)
            asym = np.max(np.abs(snap.a - np.transpose(snap.a, (0, 2, 1))))
            if asym > 1e-12 * max(np.max(np.abs(snap.a)), 1e-300):
                raise ValueError("(a^{ij}) must be symmetric")
            inner = grid.interior_mask()
            eigs = np.linalg.eigvalsh(snap.a[inner])
            if np.any(eigs[:, 0] <= 0.0):
                bad = int(np.argmax(eigs[:, 0] <= 0.0))
                raise ValueError(
                    "(a^{ij}) not positive definite at an interior node "
                    f"(min eig {eigs[bad, 0]:.3e})")

    @staticmethod
    def _eval(entry, t):
        return entry(t) if callable(entry) else entry

    def at(self, t):
        g = self._eval(self._g, t) if self._g is not None else None
        return CoeffSnapshot(t, np.asarray(self._eval(self._a, t), dtype=float),
                             np.asarray(self._eval(self._b, t), dtype=float),
                             np.asarray(self._eval(self._f, t), dtype=float),
                             None if g is None else np.asarray(g, dtype=float))

    def replace_g(self, g):
        return LinearCoefficients(self.grid, self._a, self._b, self._f, g,
                                  t0=self.t0, check=False)

    @property
    def matrix_time_independent(self):
        return not (callable(self._a) or callable(self._b)
                    or callable(self._f))


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class FicheraReport:
    t: float
    boundary_idx: np.ndarray
    q1: np.ndarray
    a_nu_max: np.ndarray      # max_j |a^{ij} nu_i| per boundary node
    q2: np.ndarray
    q3: np.ndarray
    q4: np.ndarray
    tol_zero: float
    tol_strict: float
    scale: float
    verdicts: dict = field(default_factory=dict)
    classification: str = ""
    a1_a2_consistent: bool = True

    def passes_gate(self, dim):
        """The solvability gate: A1 + A2 + B (B'' instead of B when n = 1)."""
        v = self.verdicts
        drift = v["B"] if dim >= 2 else v["B''"]
        return v["A1"] and v["A2"] and drift

    def reclassified(self, tol_zero, tol_strict):
        """Same q-values, verdicts recomputed at different tolerances."""
        verdicts, cls, consistent = _classify(
            self.q1, self.a_nu_max, self.q2, self.q3, self.q4,
            tol_zero, tol_strict)
        return FicheraReport(self.t, self.boundary_idx, self.q1,
                             self.a_nu_max, self.q2, self.q3, self.q4,
                             tol_zero, tol_strict, self.scale, verdicts,
                             cls, consistent)

    def to_dict(self):
        return {
            "t": self.t,
            "boundary_idx": [int(i) for i in self.boundary_idx],
            "q1": list(map(float, self.q1)),
            "a_nu_max": list(map(float, self.a_nu_max)),
            "q2": list(map(float, self.q2)),
            "q3": list(map(float, self.q3)),
            "q4": list(map(float, self.q4)),
            "tol_zero": self.tol_zero,
            "tol_strict": self.tol_strict,
            "scale": self.scale,
            "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
            "classification": self.classification,
            "a1_a2_consistent": bool(self.a1_a2_consistent),
        }


def _classify(q1, a_nu_max, q2, q3, q4, tol_zero, tol_strict):
    verdicts = {
        "A1": bool(np.max(np.abs(q1)) <= tol_zero
                   and np.max(a_nu_max) <= tol_zero),
        "A2": bool(np.max(q2) <= -tol_strict),
        "B": bool(np.max(q3) <= tol_zero),
        "B'": bool(np.max(q3) <= -tol_strict),
        "B''": bool(np.max(q4) <= tol_zero),
    }
    if verdicts["A1"]:
        if verdicts["B'"]:
            cls = "satisfies B'"
        elif verdicts["B"]:
            cls = "satisfies B"
        elif verdicts["B''"]:
            cls = "satisfies B'' only"
        else:
            cls = "fails"
    else:
        cls = "fails"
    consistent = (not verdicts["A1"]) or bool(np.max(q2) <= tol_zero)
    return verdicts, cls, consistent


def _boundary_derivative_data(grid, a, p=2):
    """(grad_a[x,k,i,j], div_a[x,i]) restricted to boundary nodes."""
    n = grid.dim
    bidx = grid.boundary_idx
    if isinstance(grid, RadialGrid):
        # radial-structure matrix fields: M = M_r e(x)e + M_t (I - e(x)e);
        # the ambient divergence has radial component
        # d_r M_r + (n-1)(M_r - M_t)/r and q2 reduces to d_r M_r at r = R.
        a_rr = a[:, 0, 0]
        a_tt = a[:, 1, 1] if n > 1 else a_rr
        d_arr = grid.deriv(a_rr, 1, p)
        grad_a = np.zeros((len(bidx), n, n, n))
        grad_a[:, 0, 0, 0] = d_arr[bidx]
        div_a = np.zeros((len(bidx), n))
        r = grid.points[bidx]
        div_a[:, 0] = d_arr[bidx]
        if n > 1:
            div_a[:, 0] += (n - 1) * (a_rr[bidx] - a_tt[bidx]) / r
        return grad_a, div_a
    grad_a = np.empty((grid.n_nodes, n, n, n))
    for i in range(n):
        for j in range(i, n):
            _, gij, _ = ambient_scalar_bundle(grid, a[:, i, j], p)
            grad_a[:, :, i, j] = gij
            grad_a[:, :, j, i] = gij
    div_a = np.einsum("xjij->xi", grad_a)
    return grad_a[bidx], div_a[bidx]


def check_conditions(coeffs, domain, t=0.0, tol_zero=None, tol_strict=None,
                     p=2):
    """Evaluate q1..q4 at all boundary nodes and classify the conditions.

    Tolerances default to 1e-6 and 1e-3 times the coefficient scale (the
    largest boundary magnitude of the first derivatives of a).  A report is
    always produced.
    """
    grid = coeffs.grid
    snap = coeffs.at(t)
    bidx = grid.boundary_idx
    nu = grid.boundary_normals
    grad_a, div_a = _boundary_derivative_data(grid, snap.a, p)

    a_b = snap.a[bidx]
    b_b = snap.b[bidx]
    q1 = np.einsum("xi,xij,xj->x", nu, a_b, nu)
    a_nu = np.einsum("xi,xij->xj", nu, a_b)
    a_nu_max = np.max(np.abs(a_nu), axis=1)
    q2 = np.einsum("xk,xkij,xi,xj->x", nu, grad_a, nu, nu)
    q3 = np.einsum("xi,xi->x", b_b - div_a, nu)
    q4 = np.einsum("xi,xi->x", b_b, nu)

    scale = float(np.max(np.abs(grad_a)))
    if scale == 0.0:
        scale = max(float(np.max(np.abs(snap.a))), 1.0)
    if tol_zero is None:
        tol_zero = 1e-6 * scale
    if tol_strict is None:
        tol_strict = 1e-3 * scale

    verdicts, cls, consistent = _classify(q1, a_nu_max, q2, q3, q4,
                                          tol_zero, tol_strict)
    return FicheraReport(t, bidx, q1, a_nu_max, q2, q3, q4, tol_zero,
                         tol_strict, scale, verdicts, cls, consistent)


# --------------------------------------------------------------------------
# condition (C): flatness of the forcing at t = 0
# --------------------------------------------------------------------------

def check_condition_C(g_fn, k_max=2, dt_probe=0.005, tol=1e-6):
    """One-sided probe of D_t^k g(., 0) = 0 for k <= k_max.

    ``g_fn(t)`` returns node values.  The estimate for each k uses a
    one-sided stencil exact for polynomials of degree k_max + 3, so profiles
    like t^{k_max+1} register as exactly flat.  Passing means
    |estimate_k| * dt^k <= tol * max|g| over a reference window.
    """
    npts = k_max + 4
    ts = dt_probe * np.arange(npts)
    samples = np.stack([np.asarray(g_fn(t), dtype=float) for t in ts])
    t_ref = np.linspace(0.0, 20.0 * max(k_max, 1) * dt_probe, 64)
    scale = max(float(max(np.max(np.abs(g_fn(t))) for t in t_ref)), 1e-300)
    estimates = {}
    ok = True
    for k in range(k_max + 1):
        w = fd_weights(0.0, ts, k)[k]
        est = float(np.max(np.abs(np.einsum("s,sx->x", w, samples))))
        estimates[k] = est
        if est * dt_probe ** k > tol * scale:
            ok = False
    return ok, estimates


# --------------------------------------------------------------------------
# coordinate invariance
# --------------------------------------------------------------------------

class Diffeo:
    """Smooth coordinate change with analytic first and second derivatives.

    ``jac(x)[k, i] = d phi_k / d x_i``; ``hess(x)[k, i, j] = d_i d_j phi_k``.
    """

    def __init__(self, name, fwd, jac, hess):
        self.name = name
        self.fwd = fwd
        self.jac = jac
        self.hess = hess


def identity_diffeo(n):
    return Diffeo(
        "identity",
        lambda x: np.asarray(x, dtype=float),
        lambda x: np.broadcast_to(np.eye(n), (_npts(x, n), n, n)).copy(),
        lambda x: np.zeros((_npts(x, n), n, n, n)))


def affine_1d(alpha, beta=0.0):
    return Diffeo(
        f"x -> {alpha} x + {beta}",
        lambda x: alpha * np.asarray(x, dtype=float) + beta,
        lambda x: np.full((_npts(x, 1), 1, 1), float(alpha)),
        lambda x: np.zeros((_npts(x, 1), 1, 1, 1)))


def shear_2d(lam):
    J = np.array([[1.0, lam], [0.0, 1.0]])

    def fwd(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ J.T

    return Diffeo(
        f"shear({lam})", fwd,
        lambda x: np.broadcast_to(J, (_npts(x, 2), 2, 2)).copy(),
        lambda x: np.zeros((_npts(x, 2), 2, 2, 2)))


def sine_warp_2d(eps):
    """(x, y) -> (x + eps sin y, y + eps sin x): a genuinely curved change."""

    def fwd(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = x.copy()
        out[:, 0] += eps * np.sin(x[:, 1])
        out[:, 1] += eps * np.sin(x[:, 0])
        return out

    def jac(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        J = np.zeros((x.shape[0], 2, 2))
        J[:, 0, 0] = 1.0
        J[:, 0, 1] = eps * np.cos(x[:, 1])
        J[:, 1, 0] = eps * np.cos(x[:, 0])
        J[:, 1, 1] = 1.0
        return J

    def hess(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        H = np.zeros((x.shape[0], 2, 2, 2))
        H[:, 0, 1, 1] = -eps * np.sin(x[:, 1])
        H[:, 1, 0, 0] = -eps * np.sin(x[:, 0])
        return H

    return Diffeo(f"sine-warp({eps})", fwd, jac, hess)


def _npts(x, n):
    x = np.asarray(x)
    if n == 1:
        return x.size
    return np.atleast_2d(x).shape[0]


def invariance_test(coeffs, domain, diffeo, t=0.0, p=2):
    """Transform the operator by a coordinate change and re-check conditions.

    The coefficients transform by the second-order rule (a -> J a J^T
    composed with the map, b -> J b + a : hess(phi)); image-side boundary
    derivatives are obtained by the exact chain rule from source-side
    finite differences, so no grid is meshed on the image domain.  Returns
    (source report, image report, per-condition consistency dict).
    """
    grid = coeffs.grid
    n = grid.dim
    snap = coeffs.at(t)
    src = check_conditions(coeffs, domain, t, p=p)

    pts = grid.points if n > 1 else grid.points
    J = diffeo.jac(pts)
    detJ = np.linalg.det(J)
    if np.any(np.abs(detJ) < 1e-12):
        raise SingularJacobian(
            f"diffeo {diffeo.name} has a singular Jacobian")
    Hphi = diffeo.hess(pts)
    Jinv = np.linalg.inv(J)

    bidx = grid.boundary_idx
    nu = grid.boundary_normals
    # image normal: J^{-T} nu normalized
    nu_img = np.einsum("xik,xi->xk", Jinv[bidx], nu)
    nu_img /= np.linalg.norm(nu_img, axis=1, keepdims=True)

    # pushed-forward coefficients at all nodes (for derivative stencils)
    a_img = np.einsum("xki,xij,xlj->xkl", J, snap.a, J)
    b_img = (np.einsum("xki,xi->xk", J, snap.b)
             + np.einsum("xij,xkij->xk", snap.a, Hphi))

    # source-side derivative of the pushed-forward a, then chain rule
    grad_a_src = np.empty((grid.n_nodes, n, n, n))
    if isinstance(grid, RadialGrid):
        raise SingularJacobian("invariance tests run on interval/disk grids")
    for i in range(n):
        for j in range(i, n):
            _, gij, _ = ambient_scalar_bundle(grid, a_img[:, i, j], p)
            grad_a_src[:, :, i, j] = gij
            grad_a_src[:, :, j, i] = gij
    # d/dy_m = (J^{-1})_{im} d/dx_i
    grad_a_img = np.einsum("xim,xikl->xmkl", Jinv, grad_a_src)

    ga_b = grad_a_img[bidx]
    a_b = a_img[bidx]
    b_b = b_img[bidx]
    q1 = np.einsum("xi,xij,xj->x", nu_img, a_b, nu_img)
    a_nu = np.einsum("xi,xij->xj", nu_img, a_b)
    q2 = np.einsum("xk,xkij,xi,xj->x", nu_img, ga_b, nu_img, nu_img)
    div_a = np.einsum("xjij->xi", ga_b)
    q3 = np.einsum("xi,xi->x", b_b - div_a, nu_img)
    q4 = np.einsum("xi,xi->x", b_b, nu_img)

    scale = max(float(np.max(np.abs(ga_b))), 1e-300)
    tol_zero, tol_strict = 1e-6 * scale, 1e-3 * scale
    verdicts, cls, consistent = _classify(q1, np.max(np.abs(a_nu), axis=1),
                                          q2, q3, q4, tol_zero, tol_strict)
    img = FicheraReport(t, bidx, q1, np.max(np.abs(a_nu), axis=1), q2, q3,
                        q4, tol_zero, tol_strict, scale, verdicts, cls,
                        consistent)
    agreement = {k: src.verdicts[k] == img.verdicts[k] for k in src.verdicts}
    return src, img, agreement
