"""Exact and manufactured solutions used as ground truth by the test suite.

The quadratic-pressure family v(x, t) = A(t) - B(t)|x|^2 solves the pressure
evolution v_t = (m-1) v lap v + |grad v|^2 on its positivity set when the
coefficients satisfy the ODEs obtained by matching powers of |x|:

    A' = -2 n (m-1) A B,        B' = -(2 n (m-1) + 4) B^2,

giving B(t) = 1 / (2 (n(m-1) + 2) t) and A(t) = A0 t^{-n(m-1)/(n(m-1)+2)}
with the front radius R(t) = sqrt(A/B) growing like t^{1/(n(m-1)+2)}
(t^{1/(m+1)} in one dimension).  Solutions are used from t0 = 1 onward,
where the initial pressure is smooth and nondegenerate; the evaluators
return the smooth extension across the front (no clipping), which is what
height recovery needs.
"""

import numpy as np

from .errors import NotFlatAtZero
from .fields import ScalarField


class ExactPMESolution:
    """Quadratic-pressure solution of the pressure equation in n dimensions."""

    def __init__(self, m, n, A0, t0=1.0):
        if m <= 1 or A0 <= 0 or t0 <= 0:
            raise ValueError("need m > 1, A0 > 0, t0 > 0")
        self.kind = ("quadratic-pressure-1d" if n == 1
                     else "quadratic-pressure-radial-nd")
        self.m = float(m)
        self.n = int(n)
        self.A0 = float(A0)
        self.t0 = float(t0)
        k = n * (m - 1.0) + 2.0
        self._k = k
        self._Bden = 2.0 * k
        self._Aexp = -n * (m - 1.0) / k
        self._selfcheck()

    # --- coefficient functions -------------------------------------------

    def A(self, t):
        return self.A0 * np.asarray(t, dtype=float) ** self._Aexp

    def B(self, t):
        return 1.0 / (self._Bden * np.asarray(t, dtype=float))

    def R(self, t):
        return np.sqrt(self.A(t) / self.B(t))

    def R_dot(self, t):
        t = np.asarray(t, dtype=float)
        return self.R(t) / (self._k * t)

    @property
    def front_exponent(self):
        return 1.0 / self._k

    # --- evaluators (smooth extension across the front) -------------------

    @staticmethod
    def _rho2(points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim <= 1:
            return pts * pts
        return np.einsum("xi,xi->x", pts, pts)

    def v(self, points, t):
        return self.A(t) - self.B(t) * self._rho2(points)

    def v_clipped(self, points, t):
        return np.maximum(self.v(points, t), 0.0)

    def grad_v(self, points, t):
        pts = np.asarray(points, dtype=float)
        return -2.0 * self.B(t) * pts

    def _selfcheck(self, n_samples=100, seed=7):
        rng = np.random.default_rng(seed)
        t = self.t0 * (1.0 + rng.random(n_samples))
        rho = np.sqrt(rng.random(n_samples)) * self.R(t) * 0.999
        A, B = self.A(t), self.B(t)
        v = A - B * rho * rho
        v_t = (self._Aexp * A / t) + (B / t) * rho * rho
        lap = -2.0 * self.n * B
        grad2 = 4.0 * B * B * rho * rho
        resid = v_t - (self.m - 1.0) * v * lap - grad2
        scale = np.abs(v_t) + np.abs((self.m - 1.0) * v * lap) + grad2
        if np.max(np.abs(resid) / np.maximum(scale, 1e-300)) > 1e-10:
            raise AssertionError("quadratic-pressure self-check failed")

    # --- exact height along transversal segments --------------------------

    def exact_height(self, points, t):
        """Closed-form root of (1+h) v0(x) = v(x - grad v0(x) h, t).

        With v0 = A0 - B0 |x|^2 the mapped point is x (1 + 2 B0 h) and the
        relation is a quadratic in h; the branch through h(t0) = 0 is
        returned (stable form, valid at critical points where alpha = 0).
        """
        rho2 = self._rho2(points)
        A0, B0 = self.A(self.t0), self.B(self.t0)
        A, B = self.A(t), self.B(t)
        alpha = 4.0 * B * B0 * B0 * rho2
        beta = (A0 - B0 * rho2) + 4.0 * B * B0 * rho2
        gamma = (A0 - B0 * rho2) - (A - B * rho2)
        disc = np.sqrt(beta * beta - 4.0 * alpha * gamma)
        return -2.0 * gamma / (beta + disc)

    # --- wiring into the transform module ----------------------------------

    def v0_field(self, grid):
        return ScalarField(grid, self.v(grid.points, self.t0), t=0.0)

    def v0_data(self, grid):
        from .transform import V0Data

        N = grid.n_nodes
        n = grid.dim
        B0 = self.B(self.t0)
        pts = grid.points
        vals = self.v(pts, self.t0)
        grad = np.zeros((N, n))
        if pts.ndim == 1:
            grad[:, 0] = -2.0 * B0 * pts
        else:
            grad[:, :] = -2.0 * B0 * pts
        hess = np.broadcast_to(-2.0 * B0 * np.eye(n), (N, n, n)).copy()
        third = np.zeros((N, n, n, n))
        return V0Data(vals, grad, hess, third)

    def problem(self, grid, tube_radius=None):
        from .transform import PMEProblem

        return PMEProblem(self.m, self.v0_field(grid),
                          v0_data=self.v0_data(grid),
                          tube_radius=tube_radius)


def quadratic_pressure_1d(m, A0=1.0, t0=1.0):
    return ExactPMESolution(m, 1, A0, t0)


def quadratic_pressure_radial(m, n, A0=1.0, t0=1.0):
    return ExactPMESolution(m, n, A0, t0)


# --------------------------------------------------------------------------
# manufactured solutions for the linear problem
# --------------------------------------------------------------------------

class TimeProfile:
    """Scalar time factor with its derivative and known flatness at t = 0."""

    def __init__(self, fn, dfn, flat_through, label):
        self.fn = fn
        self.dfn = dfn
        self.flat_through = flat_through    # D_t^k (0) = 0 for k <= this
        self.label = label

    def __call__(self, t):
        return self.fn(t)


def exp_flat_profile(rate=1.0):
    """exp(-rate/t): flat to all orders at t = 0."""
    def fn(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-rate / t[pos])
        return out

    def dfn(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-rate / t[pos]) * rate / t[pos] ** 2
        return out

    return TimeProfile(fn, dfn, np.inf, f"exp(-{rate}/t)")


def power_profile(p):
    """t^p: flat through order p - 1 only."""
    def fn(t):
        return np.asarray(t, dtype=float) ** p

    def dfn(t):
        return p * np.asarray(t, dtype=float) ** (p - 1)

    return TimeProfile(fn, dfn, p - 1, f"t^{p}")


class SpatialProfile:
    """Shape function with analytic derivatives on a 1D interval."""

    def __init__(self, phi, dphi, d2phi, label):
        self.phi, self.dphi, self.d2phi = phi, dphi, d2phi
        self.label = label


def sine_bump_profile(a=0.0, b=1.0):
    """phi = sin(pi xi) xi (1 - xi) on (a, b), xi the affine chart to (0, 1)."""
    L = b - a

    def xi(x):
        return (np.asarray(x, dtype=float) - a) / L

    def phi(x):
        s = xi(x)
        return np.sin(np.pi * s) * s * (1.0 - s)

    def dphi(x):
        s = xi(x)
        return (np.pi * np.cos(np.pi * s) * s * (1.0 - s)
                + np.sin(np.pi * s) * (1.0 - 2.0 * s)) / L

    def d2phi(x):
        s = xi(x)
        return (-np.pi ** 2 * np.sin(np.pi * s) * s * (1.0 - s)
                + 2.0 * np.pi * np.cos(np.pi * s) * (1.0 - 2.0 * s)
                - 2.0 * np.sin(np.pi * s)) / L ** 2

    return SpatialProfile(phi, dphi, d2phi, "sin(pi x) x (1-x)")


def sine_profile(a=0.0, b=1.0):
    """phi = sin(pi xi) on (a, b): vanishes at both ends, nonzero slope there."""
    L = b - a

    def phi(x):
        return np.sin(np.pi * (np.asarray(x, dtype=float) - a) / L)

    def dphi(x):
        return np.pi / L * np.cos(np.pi * (np.asarray(x, dtype=float) - a) / L)

    def d2phi(x):
        return -(np.pi / L) ** 2 * np.sin(
            np.pi * (np.asarray(x, dtype=float) - a) / L)

    return SpatialProfile(phi, dphi, d2phi, "sin(pi x)")


def gaussian_profile(center=0.0, sigma=1.0):
    def phi(x):
        z = (np.asarray(x, dtype=float) - center) / sigma
        return np.exp(-0.5 * z * z)

    def dphi(x):
        z = (np.asarray(x, dtype=float) - center) / sigma
        return -z / sigma * np.exp(-0.5 * z * z)

    def d2phi(x):
        z = (np.asarray(x, dtype=float) - center) / sigma
        return (z * z - 1.0) / sigma ** 2 * np.exp(-0.5 * z * z)

    return SpatialProfile(phi, dphi, d2phi, "gaussian")


class ManufacturedLinear:
    """Forcing g := w_t - (a w'' + b w' + f w) for w = T(t) phi(x) (1D)."""

    def __init__(self, grid, coeffs, time_profile, spatial_profile,
                 k_max=2):
        if time_profile.flat_through < k_max:
            raise NotFlatAtZero(
                f"profile {time_profile.label} is flat only through order "
                f"{time_profile.flat_through}, need k_max = {k_max}")
        self.grid = grid
        self.coeffs = coeffs
        self.T = time_profile
        self.phi = spatial_profile
        x = grid.points
        self._phi = spatial_profile.phi(x)
        self._dphi = spatial_profile.dphi(x)
        self._d2phi = spatial_profile.d2phi(x)

    def w_exact(self, t):
        return self.T(t) * self._phi

    def w_t_exact(self, t):
        return self.T.dfn(t) * self._phi

    def g(self, t):
        snap = self.coeffs.at(t)
        Lphi = (snap.a[:, 0, 0] * self._d2phi + snap.b[:, 0] * self._dphi
                + snap.f * self._phi)
        return self.T.dfn(t) * self._phi - self.T(t) * Lphi

    def with_g(self):
        """The coefficient set with this manufactured forcing attached."""
        return self.coeffs.replace_g(self.g)


def mms_linear(grid, coeffs, time_profile, spatial_profile, k_max=2):
    """Manufactured forcing for the linear problem; validates flatness.

    Errors with NotFlatAtZero when the time profile of w_exact fails
    D_t^k w(0) = 0 for some k <= k_max.
    """
    return ManufacturedLinear(grid, coeffs, time_profile, spatial_profile,
                              k_max)
