"""Fixed-domain geometry: signed distance, normals, collar charts, cutoffs.

Supported domain kinds are deliberately desk-scale: 1D intervals, 2D disks,
radial reductions of n-D balls, and star-shaped 2D regions given by sampled
boundary curves.  Near the boundary each domain carries boundary-fitted
collar coordinates (X, Y) where -Y is the distance to the boundary, plus a
partition of unity whose boundary cutoffs are constant in Y on the inner
half of the collar (so their normal derivative vanishes there by
construction).

All geometry is immutable after construction and safe to share across
threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CollarTooWide, ConfigInvalid, NotOnBoundary


# --------------------------------------------------------------------------
# smooth profiles
# --------------------------------------------------------------------------

def _flat_exp(s):
    """exp(-1/s) for s > 0, identically 0 for s <= 0 (C-infinity)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smoothstep_down(s):
    """C-infinity transition: 1 for s <= 0, 0 for s >= 1, monotone between."""
    a = _flat_exp(1.0 - np.asarray(s, dtype=float))
    b = _flat_exp(np.asarray(s, dtype=float))
    return a / (a + b)


def _flat_exp_deriv(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


def smoothstep_down_deriv(s):
    """Derivative of smoothstep_down (analytic, vanishes outside (0, 1))."""
    s = np.asarray(s, dtype=float)
    a = _flat_exp(1.0 - s)
    b = _flat_exp(s)
    da = -_flat_exp_deriv(1.0 - s)
    db = _flat_exp_deriv(s)
    return (da * b - a * db) / (a + b) ** 2


def _wrap_pi(theta):
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


# --------------------------------------------------------------------------
# domain
# --------------------------------------------------------------------------

class Domain:
    """Geometry of the fixed region with a smooth boundary.

    Use the classmethod constructors ``interval``, ``disk``, ``radial`` and
    ``star`` (or ``star_from_csv``).  ``dim`` is the ambient dimension n;
    for the radial kind the stored coordinate is the radius alone
    (``coord_dim == 1``) while ``dim`` is the ambient n.
    """

    def __init__(self, kind, dim, coord_dim, params, collar_width=None):
        self.kind = kind
        self.dim = dim
        self.coord_dim = coord_dim
        self.params = params
        if collar_width is None:
            collar_width = self._default_collar()
        if collar_width <= 0:
            raise ConfigInvalid("collar width must be positive")
        self._collar_injective(collar_width)
        self.collar_width = float(collar_width)

    # --- constructors -----------------------------------------------------

    @classmethod
    def interval(cls, a, b, collar_width=None):
        if not b > a:
            raise ConfigInvalid(f"interval needs b > a, got ({a}, {b})")
        return cls("interval", 1, 1, {"a": float(a), "b": float(b)},
                   collar_width)

    @classmethod
    def disk(cls, center, radius, collar_width=None):
        if radius <= 0:
            raise ConfigInvalid("disk radius must be positive")
        c = np.asarray(center, dtype=float).reshape(2)
        return cls("disk", 2, 2, {"center": c, "radius": float(radius)},
                   collar_width)

    @classmethod
    def radial(cls, n, radius, collar_width=None):
        if radius <= 0 or n < 1:
            raise ConfigInvalid("radial domain needs n >= 1 and radius > 0")
        return cls("radial", int(n), 1, {"radius": float(radius)},
                   collar_width)

    @classmethod
    def star(cls, boundary_points, collar_width=None):
        """Star-shaped 2D domain from counterclockwise boundary samples."""
        from scipy.interpolate import CubicSpline

        pts = np.asarray(boundary_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 8:
            raise ConfigInvalid("star boundary needs >= 8 (x, y) samples")
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        # require counterclockwise orientation (positive shoelace area)
        area2 = np.sum(pts[:, 0] * np.roll(pts[:, 1], -1)
                       - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area2 <= 0:
            raise ConfigInvalid("star boundary samples must be ordered "
                                "counterclockwise")
        closed = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        spline = CubicSpline(s, closed, bc_type="periodic")
        return cls("star", 2, 2, {"spline": spline, "samples": pts},
                   collar_width)

    @classmethod
    def star_from_csv(cls, path, collar_width=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls.star(data[:, :2], collar_width)

    # --- basic geometry -----------------------------------------------------

    @property
    def diameter(self):
        if self.kind == "interval":
            return self.params["b"] - self.params["a"]
        if self.kind == "disk":
            return 2.0 * self.params["radius"]
        if self.kind == "radial":
            return 2.0 * self.params["radius"]
        pts = self.params["samples"]
        return float(np.ptp(pts, axis=0).max())

    def _default_collar(self):
        cap = 0.2 * self.diameter
        if self.kind == "interval":
            biggest = 0.5 * (self.params["b"] - self.params["a"])
        elif self.kind in ("disk", "radial"):
            biggest = self.params["radius"]
        else:
            biggest = self._largest_injective_collar(cap)
        return min(cap, 0.999 * biggest)

    def signed_distance(self, x):
        """Signed distance to the boundary, negative inside."""
        if self.kind == "interval":
            x = np.asarray(x, dtype=float)
            return np.maximum(self.params["a"] - x, x - self.params["b"])
        if self.kind == "radial":
            return np.asarray(x, dtype=float) - self.params["radius"]
        if self.kind == "disk":
            p = np.atleast_2d(np.asarray(x, dtype=float))
            r = np.linalg.norm(p - self.params["center"], axis=1)
            d = r - self.params["radius"]
            return d if np.asarray(x).ndim == 2 else d[0]
        p = np.atleast_2d(np.asarray(x, dtype=float))
        s, dist = self._project_star(p)
        out = dist
        return out if np.asarray(x).ndim == 2 else out[0]

    def outward_normal(self, x, tol=None):
        """Unit outward normal at a boundary point (NotOnBoundary otherwise)."""
        if tol is None:
            tol = 1e-8 * self.diameter
        d = np.abs(self.signed_distance(x))
        if np.any(np.atleast_1d(d) > tol):
            raise NotOnBoundary(
                f"point at distance {np.max(np.atleast_1d(d)):.3e} from the "
                f"boundary (tol {tol:.3e})")
        if self.kind == "interval":
            x = np.asarray(x, dtype=float)
            mid = 0.5 * (self.params["a"] + self.params["b"])
            return np.where(x > mid, 1.0, -1.0)
        if self.kind == "radial":
            return np.ones_like(np.asarray(x, dtype=float))
        if self.kind == "disk":
            p = np.atleast_2d(np.asarray(x, dtype=float))
            v = p - self.params["center"]
            nrm = v / np.linalg.norm(v, axis=1, keepdims=True)
            return nrm if np.asarray(x).ndim == 2 else nrm[0]
        p = np.atleast_2d(np.asarray(x, dtype=float))
        s, _ = self._project_star(p)
        nrm = self._star_normal(s)
        return nrm if np.asarray(x).ndim == 2 else nrm[0]

    def boundary_points(self, count):
        """Evenly spread boundary samples (both endpoints for 1D kinds)."""
        if self.kind == "interval":
            return np.array([self.params["a"], self.params["b"]])
        if self.kind == "radial":
            return np.array([self.params["radius"]])
        if self.kind == "disk":
            th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
            c, r = self.params["center"], self.params["radius"]
            return c + r * np.stack([np.cos(th), np.sin(th)], axis=1)
        s = np.linspace(0.0, 1.0, count, endpoint=False)
        return self.params["spline"](s)

    # --- star-shaped helpers ------------------------------------------------

    def _star_point(self, s):
        return self.params["spline"](np.mod(s, 1.0))

    def _star_tangent(self, s):
        t = self.params["spline"](np.mod(s, 1.0), 1)
        return t / np.linalg.norm(t, axis=-1, keepdims=True)

    def _star_normal(self, s):
        t = self._star_tangent(s)
        # CCW curve: outward normal is the tangent rotated clockwise
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def _project_star(self, pts):
        """Nearest-parameter projection onto the boundary spline.

        Returns (s, signed_distance) per point; Newton-refined to ~1e-12 of
        the spline (accuracy relative to the true curve is set by the
        boundary sampling resolution).
        """
        spline = self.params["spline"]
        s_grid = np.linspace(0.0, 1.0, 4 * len(self.params["samples"]),
                             endpoint=False)
        gpts = spline(s_grid)
        d2 = ((pts[:, None, :] - gpts[None, :, :]) ** 2).sum(axis=2)
        s = s_grid[np.argmin(d2, axis=1)]
        for _ in range(40):
            g = spline(np.mod(s, 1.0))
            dg = spline(np.mod(s, 1.0), 1)
            d2g = spline(np.mod(s, 1.0), 2)
            r = pts - g
            f = -(r * dg).sum(axis=1)
            fp = (dg * dg).sum(axis=1) - (r * d2g).sum(axis=1)
            step = np.where(np.abs(fp) > 1e-30, f / fp, 0.0)
            step = np.clip(step, -0.25, 0.25)
            s = s - step
            if np.max(np.abs(step)) < 1e-13:
                break
        g = spline(np.mod(s, 1.0))
        r = pts - g
        dist = np.linalg.norm(r, axis=1)
        sign = np.sign((r * self._star_normal(s)).sum(axis=1))
        sign[sign == 0] = -1.0
        return np.mod(s, 1.0), sign * dist

    # --- collar injectivity ---------------------------------------------------

    def _collar_injective(self, c0, n_samples=128, rtol=1e-6):
        """Numerical injectivity check of the inward normal collar map."""
        if self.kind == "interval":
            ok = c0 < 0.5 * (self.params["b"] - self.params["a"])
        elif self.kind in ("disk", "radial"):
            ok = c0 < self.params["radius"]
        else:
            ok = self._star_collar_ok(c0, n_samples, rtol)
        if not ok:
            raise CollarTooWide(
                f"collar width {c0:.4g} fails the injectivity test for "
                f"{self.kind} domain")

    def _star_collar_ok(self, c0, n_samples, rtol):
        s = np.linspace(0.0, 1.0, n_samples, endpoint=False)
        gamma = self._star_point(s)
        nu = self._star_normal(s)
        for depth in (0.5 * c0, c0):
            inner = gamma - depth * nu
            s_back, d_back = self._project_star(inner)
            if not np.allclose(-d_back, depth, rtol=rtol,
                               atol=rtol * self.diameter):
                return False
            ds = np.abs(_wrap_pi(2.0 * np.pi * (s_back - s))) / (2.0 * np.pi)
            if np.max(ds) > 1e-4:
                return False
        return True

    def _largest_injective_collar(self, cap):
        lo, hi = 0.0, cap
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if mid <= 0:
                break
            if self._star_collar_ok(mid, 128, 1e-6):
                lo = mid
            else:
                hi = mid
        if lo == 0.0:
            raise CollarTooWide("no injective collar found by bisection")
        return lo

    def __repr__(self):
        return f"Domain(kind={self.kind!r}, dim={self.dim})"


# --------------------------------------------------------------------------
# charts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Boundary-fitted collar chart: x <-> (X, Y) with -Y = boundary distance.

    ``X`` has n-1 components scaled to (-1, 1); on Y = 0 the pushed-forward
    outward normal is the unit Y-direction.  ``jacobian_samples`` holds
    |dx/d(X,Y)| on a small (X, Y) lattice for quadrature diagnostics.
    """

    index: int
    domain: Domain
    center: object          # endpoint (1D), center angle (disk), center s (star)
    halfwidth: float        # tangential halfwidth in the native parameter
    jacobian_samples: np.ndarray = field(repr=False, default=None)

    def forward(self, x):
        """Map collar points to (X, Y); X is None for 1D kinds."""
        dom = self.domain
        if dom.kind == "interval":
            x = np.asarray(x, dtype=float)
            if self.center == dom.params["b"]:
                return None, x - dom.params["b"]
            return None, dom.params["a"] - x
        if dom.kind == "radial":
            return None, np.asarray(x, dtype=float) - dom.params["radius"]
        if dom.kind == "disk":
            p = np.atleast_2d(np.asarray(x, dtype=float))
            rel = p - dom.params["center"]
            r = np.linalg.norm(rel, axis=1)
            th = np.arctan2(rel[:, 1], rel[:, 0])
            X = _wrap_pi(th - self.center) / self.halfwidth
            return X, r - dom.params["radius"]
        p = np.atleast_2d(np.asarray(x, dtype=float))
        s, d = dom._project_star(p)
        X = _wrap_pi(2.0 * np.pi * (s - self.center)) / (
            2.0 * np.pi * self.halfwidth)
        return X, d

    def inverse(self, X, Y):
        dom = self.domain
        Y = np.asarray(Y, dtype=float)
        if dom.kind == "interval":
            if self.center == dom.params["b"]:
                return dom.params["b"] + Y
            return dom.params["a"] - Y
        if dom.kind == "radial":
            return dom.params["radius"] + Y
        if dom.kind == "disk":
            th = self.center + np.asarray(X, dtype=float) * self.halfwidth
            r = dom.params["radius"] + Y
            c = dom.params["center"]
            return c + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        s = self.center + np.asarray(X, dtype=float) * self.halfwidth
        return dom._star_point(s) + Y[..., None] * dom._star_normal(s)

    def contains(self, x):
        X, Y = self.forward(x)
        inside = (-self.domain.collar_width < np.asarray(Y)) & (np.asarray(Y) <= 1e-12)
        if X is None:
            return inside
        return inside & (np.abs(X) < 1.0)


class PartitionOfUnity:
    """Cutoffs xi_0..xi_K with sum 1 and D_Y xi_lambda = 0 on |Y| <= c0/2.

    The boundary cutoffs (lambda >= 1) are products tau_lambda(X) * eta(d)
    where eta is 1 on [0, c0/2] and supported in [0, 3c0/4); tau_lambda is a
    normalized partition over the tangential parameter.  xi_0 = 1 - eta(d)
    covers the interior patch.
    """

    def __init__(self, domain, charts):
        self.domain = domain
        self.charts = charts
        self.c0 = domain.collar_width

    def _eta(self, d):
        c0 = self.c0
        return smoothstep_down((d - 0.5 * c0) / (0.25 * c0))

    def _tau(self, points):
        """Tangential weights per boundary chart, shape (K, N)."""
        dom = self.domain
        K = len(self.charts)
        if dom.kind == "radial":
            return np.ones((1, np.asarray(points, dtype=float).size))
        if dom.kind == "interval":
            # endpoint charts never overlap; split at the midpoint, which
            # lies outside supp(eta) so each cutoff stays smooth
            pts = np.asarray(points, dtype=float).reshape(-1)
            mid = 0.5 * (dom.params["a"] + dom.params["b"])
            tau = np.zeros((2, pts.size))
            tau[0] = (pts <= mid).astype(float)
            tau[1] = (pts > mid).astype(float)
            return tau
        # 2D kinds: smooth periodic bumps in the tangential parameter
        if dom.kind == "disk":
            p = np.atleast_2d(np.asarray(points, dtype=float))
            rel = p - dom.params["center"]
            param = np.arctan2(rel[:, 1], rel[:, 0])
            period = 2.0 * np.pi
        else:
            p = np.atleast_2d(np.asarray(points, dtype=float))
            s, _ = dom._project_star(p)
            param = 2.0 * np.pi * s
            period = 2.0 * np.pi
        centers = np.array([2.0 * np.pi * k / K for k in range(K)])
        phi1 = np.pi / K
        phi2 = 1.9 * np.pi / K
        raw = np.empty((K, param.size))
        for k in range(K):
            a = np.abs(_wrap_pi(param - centers[k]))
            raw[k] = smoothstep_down((a - phi1) / (phi2 - phi1))
        return raw / raw.sum(axis=0, keepdims=True)

    def values(self, points):
        """All cutoffs at the given points, shape (K+1, N); row 0 is xi_0."""
        d = -np.minimum(self.domain.signed_distance(points), 0.0)
        d = np.atleast_1d(d)
        eta = self._eta(d)
        tau = self._tau(points)
        out = np.empty((len(self.charts) + 1, d.size))
        out[0] = 1.0 - eta
        out[1:] = tau * eta[None, :]
        return out


def build_charts(domain, K=None):
    """Boundary charts covering the collar plus the partition of unity.

    K is the number of boundary charts; 1D kinds fix it (2 for intervals,
    1 for radial), 2D kinds default to 4 and require K >= 3.
    """
    if domain.kind == "interval":
        charts = [
            Chart(1, domain, domain.params["a"], 0.0),
            Chart(2, domain, domain.params["b"], 0.0),
        ]
    elif domain.kind == "radial":
        charts = [Chart(1, domain, domain.params["radius"], 0.0)]
    else:
        if K is None:
            K = 4
        if K < 3:
            raise ConfigInvalid("2D domains need K >= 3 boundary charts")
        if domain.kind == "disk":
            halfwidth = 2.0 * np.pi / K
            charts = [Chart(k + 1, domain, 2.0 * np.pi * k / K, halfwidth)
                      for k in range(K)]
        else:
            halfwidth = 1.0 / K
            charts = [Chart(k + 1, domain, k / K, halfwidth)
                      for k in range(K)]
        charts = [_with_jacobian_samples(ch) for ch in charts]
    return charts, PartitionOfUnity(domain, charts)


def _with_jacobian_samples(chart):
    """Attach |dx/d(X,Y)| samples on a 5x5 (X, Y) lattice."""
    dom = chart.domain
    Xs = np.linspace(-0.9, 0.9, 5)
    Ys = np.linspace(-dom.collar_width * 0.95, 0.0, 5)
    jac = np.empty((5, 5))
    hX, hY = 1e-6, 1e-6
    for i, X in enumerate(Xs):
        for j, Y in enumerate(Ys):
            dX = (chart.inverse(X + hX, Y) - chart.inverse(X - hX, Y)) / (2 * hX)
            dY = (chart.inverse(X, Y + hY) - chart.inverse(X, Y - hY)) / (2 * hY)
            jac[i, j] = abs(dX[0] * dY[1] - dX[1] * dY[0])
    return Chart(chart.index, dom, chart.center, chart.halfwidth, jac)
