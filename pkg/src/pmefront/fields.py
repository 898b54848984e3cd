"""Grid-sampled fields with finite-difference calculus.

Three grid kinds cover the supported domains:

* ``IntervalGrid`` — uniform 1D nodes with both endpoints on the boundary.
* ``RadialGrid``  — uniform nodes in the radius of an n-D ball; radial
  fields are even in r, so stencils near the center fold across r = 0 by
  even reflection.  Only r = R is a boundary node.
* ``DiskGrid``    — polar tensor grid (rings x angles) plus a single center
  node.  Radial stencils run along full diameters through the center, so
  centered differences stay available everywhere except at the outer
  boundary, which uses one-sided stencils of the same order.

Boundary nodes never use ghost values: the continuous problem carries no
boundary data and the discretization must not invent any.  Interior
stencils are centered of order p in {2, 4}; boundary stencils are one-sided
of the same order.
"""

import json

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import CollarUnderResolved, GridTooCoarse

_SPHERE_AREA = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


def fd_weights(z, x, m):
    """Fornberg weights for derivatives 0..m at z from nodes x.

    Returns an (m+1, len(x)) array; row k holds the weights of the k-th
    derivative.  Exact for polynomials up to degree len(x) - 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


class StencilTable:
    """Padded per-node stencil rows: out[i] = sum_s wts[i,s] * v[cols[i,s]]."""

    def __init__(self, cols, wts, n_cols=None):
        self.cols = np.ascontiguousarray(cols, dtype=np.int64)
        self.wts = np.ascontiguousarray(wts, dtype=float)
        self.n_cols = self.cols.max() + 1 if n_cols is None else n_cols

    def apply(self, values):
        return _kernels.apply_stencil(np.ascontiguousarray(values, dtype=float),
                                      self.cols, self.wts)

    def to_csr(self):
        n, w = self.cols.shape
        rows = np.repeat(np.arange(n), w)
        mat = sp.csr_matrix((self.wts.ravel(), (rows, self.cols.ravel())),
                            shape=(n, self.n_cols))
        mat.sum_duplicates()
        return mat


def _line_windows(n, w):
    """Start index of the (clamped, centered) length-w window per node."""
    starts = np.arange(n) - w // 2
    return np.clip(starts, 0, n - w)


def _line_stencil(n, h, k, p, fold_even_left=False):
    """Stencil table for the k-th derivative on a uniform line of n nodes.

    With ``fold_even_left`` the line is the radius of an even function and
    windows may extend across 0; reflected columns keep their weights (the
    apply step sums duplicates), with signs flipped for the mirrored
    odd-derivative contribution handled by position, not sign: positions
    are signed, columns are |index|.
    """
    w = k + p
    if w > n + (n - 1 if fold_even_left else 0):
        raise GridTooCoarse(
            f"derivative {k} at order {p} needs {w} nodes, line has {n}")
    cols = np.empty((n, w), dtype=np.int64)
    wts = np.empty((n, w))
    for i in range(n):
        if fold_even_left:
            start = min(i - w // 2, n - w)
        else:
            start = min(max(i - w // 2, 0), n - w)
        idx = np.arange(start, start + w)
        wt = fd_weights(i * h, idx * h, k)[k]
        if k >= 1:
            # enforce the zeroth-moment condition: a derivative stencil
            # must annihilate constants; fold the weight-roundoff residue
            # into the smallest entry, where the correction is not absorbed
            wt[np.argmin(np.abs(wt))] -= wt.sum()
        cols[i] = np.abs(idx)
        wts[i] = wt
    return StencilTable(cols, wts, n_cols=n)


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

class Grid:
    """Common node bookkeeping plus cached derivative operators."""

    def __init__(self, domain):
        self.domain = domain
        self._tables = {}
        self._csr = {}

    @property
    def n_nodes(self):
        return self.points.shape[0]

    def deriv_csr(self, name, p):
        key = (name, p)
        if key not in self._csr:
            self._csr[key] = self._build_csr(name, p)
        return self._csr[key]

    def interior_mask(self):
        m = np.ones(self.n_nodes, dtype=bool)
        m[self.boundary_idx] = False
        return m

    def descriptor(self):
        raise NotImplementedError

    # each subclass implements gradient/hessian/third returning ambient
    # tensors of shape (N, d), (N, d, d), (N, d, d, d)


class IntervalGrid(Grid):
    def __init__(self, domain, nx):
        super().__init__(domain)
        if nx < 4:
            raise GridTooCoarse("interval grid needs at least 4 nodes")
        a, b = domain.params["a"], domain.params["b"]
        self.nx = nx
        self.h = (b - a) / (nx - 1)
        self.points = np.linspace(a, b, nx)
        self.coords = self.points[:, None]
        self.boundary_idx = np.array([0, nx - 1])
        self.boundary_normals = np.array([[-1.0], [1.0]])
        self.quad_weights = np.full(nx, self.h)
        self.quad_weights[[0, -1]] = 0.5 * self.h
        self.dim = 1

    def _table(self, k, p):
        key = (k, p)
        if key not in self._tables:
            self._tables[key] = _line_stencil(self.nx, self.h, k, p)
        return self._tables[key]

    def _build_csr(self, name, p):
        k = {"d1": 1, "d2": 2, "d3": 3, "d4": 4}[name]
        return self._table(k, p).to_csr()

    def deriv(self, values, k, p=2):
        return self._table(k, p).apply(values)

    def gradient(self, values, p=2):
        return self.deriv(values, 1, p)[:, None]

    def hessian(self, values, p=2):
        return self.deriv(values, 2, p)[:, None, None]

    def third(self, values, p=2):
        return self.deriv(values, 3, p)[:, None, None, None]

    def laplacian_csr(self, p=2):
        return self.deriv_csr("d2", p)

    def descriptor(self):
        return {"grid": "interval", "nx": self.nx,
                "a": self.domain.params["a"], "b": self.domain.params["b"]}


class RadialGrid(Grid):
    """Radius-only grid for radially symmetric fields on an n-D ball."""

    def __init__(self, domain, nr):
        super().__init__(domain)
        if nr < 4:
            raise GridTooCoarse("radial grid needs at least 4 nodes")
        R = domain.params["radius"]
        self.nr = nr
        self.h = R / (nr - 1)
        self.points = np.linspace(0.0, R, nr)
        self.coords = self.points[:, None]
        self.boundary_idx = np.array([nr - 1])
        self.boundary_normals = np.array([[1.0]])
        self.dim = domain.dim
        self.quad_weights = self._ball_weights()

    def _ball_weights(self):
        from math import gamma, pi

        n = self.dim
        area = _SPHERE_AREA.get(n, 2.0 * pi ** (n / 2.0) / gamma(n / 2.0))
        r = self.points
        w = np.zeros_like(r)
        # exact integral of r^{n-1} against the piecewise-linear hat basis
        for i in range(self.nr):
            lo = r[i - 1] if i > 0 else r[i]
            hi = r[i + 1] if i < self.nr - 1 else r[i]
            if i > 0:
                a0, b0 = -r[i - 1] / self.h, 1.0 / self.h
                w[i] += (a0 * (r[i] ** n - lo ** n) / n
                         + b0 * (r[i] ** (n + 1) - lo ** (n + 1)) / (n + 1))
            if i < self.nr - 1:
                a1, b1 = r[i + 1] / self.h, -1.0 / self.h
                w[i] += (a1 * (hi ** n - r[i] ** n) / n
                         + b1 * (hi ** (n + 1) - r[i] ** (n + 1)) / (n + 1))
        return area * w

    def _table(self, k, p):
        key = (k, p)
        if key not in self._tables:
            self._tables[key] = _line_stencil(self.nr, self.h, k, p,
                                              fold_even_left=True)
        return self._tables[key]

    def _build_csr(self, name, p):
        k = {"d1": 1, "d2": 2, "d3": 3, "d4": 4}[name]
        return self._table(k, p).to_csr()

    def deriv(self, values, k, p=2):
        return self._table(k, p).apply(values)

    def gradient(self, values, p=2):
        """Radial component of the gradient (the only nonzero one)."""
        return self.deriv(values, 1, p)[:, None]

    def hessian(self, values, p=2):
        """Radial second derivative; ambient tensors are built by callers."""
        return self.deriv(values, 2, p)[:, None, None]

    def third(self, values, p=2):
        return self.deriv(values, 3, p)[:, None, None, None]

    def descriptor(self):
        return {"grid": "radial", "nr": self.nr, "n": self.dim,
                "radius": self.domain.params["radius"]}


class DiskGrid(Grid):
    """Polar grid on a disk: a center node plus nr-1 rings of ntheta angles."""

    def __init__(self, domain, nr, ntheta):
        super().__init__(domain)
        if nr < 4:
            raise GridTooCoarse("disk grid needs at least 4 rings")
        if ntheta < 8 or ntheta % 2:
            raise GridTooCoarse("disk grid needs an even ntheta >= 8")
        self.nr, self.ntheta = nr, ntheta
        R = domain.params["radius"]
        self.R = R
        self.dr = R / (nr - 1)
        self.dtheta = 2.0 * np.pi / ntheta
        self.radii = np.linspace(0.0, R, nr)
        self.thetas = np.arange(ntheta) * self.dtheta
        self.dim = 2

        n = 1 + (nr - 1) * ntheta
        r = np.zeros(n)
        th = np.zeros(n)
        for i in range(1, nr):
            sl = self._ring(i)
            r[sl] = self.radii[i]
            th[sl] = self.thetas
        self.node_r, self.node_theta = r, th
        c = domain.params["center"]
        self.points = c + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
        self.coords = self.points
        self.boundary_idx = np.arange(self._ring(nr - 1).start, n)
        self.boundary_normals = np.stack(
            [np.cos(self.thetas), np.sin(self.thetas)], axis=1)
        self.quad_weights = self._polar_weights()

    def _ring(self, i):
        start = 1 + (i - 1) * self.ntheta
        return slice(start, start + self.ntheta)

    def node_id(self, i, j):
        return 0 if i == 0 else 1 + (i - 1) * self.ntheta + j % self.ntheta

    def _polar_weights(self):
        w = np.zeros(self.n_nodes)
        dr, dth = self.dr, self.dtheta
        w[0] = np.pi * dr * dr / 3.0
        for i in range(1, self.nr):
            r = self.radii[i]
            lo = max(r - dr, 0.0)
            hi = min(r + dr, self.R)
            # integral of r' * hat_i(r') over the support
            val = ((r ** 2 - lo ** 2) * (-lo) / (2 * dr)
                   + (r ** 3 - lo ** 3) / (3 * dr))
            if i < self.nr - 1:
                val += ((hi ** 2 - r ** 2) * hi / (2 * dr)
                        - (hi ** 3 - r ** 3) / (3 * dr))
            w[self._ring(i)] = dth * val
        return w

    # --- polar stencil tables ------------------------------------------------

    def _theta_table(self, k, p=None):
        """Spectral (Fourier) differentiation in the angle, per ring.

        Polar coordinates put 1/r and 1/r^2 factors on the angular
        derivatives; finite differences in theta would leave O(dtheta^2)/r
        residues near the center even on linear fields.  Fourier
        differentiation is exact for every resolved harmonic, so the polar
        cancellations hold to roundoff (the order-p choice governs the
        radial stencils only).
        """
        key = ("th", k)
        if key in self._tables:
            return self._tables[key]
        nt = self.ntheta
        waven = np.fft.fftfreq(nt, d=1.0 / nt)
        if k == 1:
            sym = 1j * waven
            sym[nt // 2] = 0.0      # zero the Nyquist mode (odd derivative)
        elif k == 2:
            sym = -(waven ** 2)
        else:
            raise GridTooCoarse("theta derivatives implemented for k <= 2")
        D = np.real(np.fft.ifft(sym[:, None] * np.fft.fft(np.eye(nt),
                                                          axis=0), axis=0))
        cols = np.zeros((self.n_nodes, nt), dtype=np.int64)
        wts = np.zeros((self.n_nodes, nt))
        ring_ids = np.empty(nt, dtype=np.int64)
        for i in range(1, self.nr):
            for j in range(nt):
                ring_ids[j] = self.node_id(i, j)
            for j in range(nt):
                cols[ring_ids[j]] = ring_ids
                wts[ring_ids[j]] = D[j]
        tab = StencilTable(cols, wts, n_cols=self.n_nodes)
        self._tables[key] = tab
        return tab

    def _radial_table(self, k, p):
        """d^k/dr^k rows for ring nodes, via stencils along full diameters.

        The innermost rings get two extra orders of accuracy: the polar
        chain rule divides first radial derivatives by r, which would
        otherwise demote the global convergence order near the center.
        Centered windows are always available there thanks to the
        through-center diameter lines.
        """
        key = ("r", k, p)
        if key in self._tables:
            return self._tables[key]
        w = k + p
        w_in = k + p + 2
        nline = 2 * self.nr - 1
        if w_in > nline:
            raise GridTooCoarse("disk grid too coarse for radial stencils")
        half = self.ntheta // 2
        cols = np.zeros((self.n_nodes, w_in), dtype=np.int64)
        wts = np.zeros((self.n_nodes, w_in))
        line_tab = _line_stencil(nline, self.dr, k, p)
        line_tab_in = _line_stencil(nline, self.dr, k, p + 2)
        for j in range(half):
            # line position index m = s/dr + (nr-1), s in [-R, R]
            def line_node(mpos):
                s = mpos - (self.nr - 1)
                if s == 0:
                    return 0
                if s > 0:
                    return self.node_id(s, j)
                return self.node_id(-s, j + half)
            ids = np.array([line_node(mm) for mm in range(nline)])
            for i in range(1, self.nr):
                tab = line_tab_in if i <= 3 else line_tab
                width = w_in if i <= 3 else w
                # node at s = +i  (angle j): d/dr = +d/ds
                mpos = (self.nr - 1) + i
                nid = self.node_id(i, j)
                cols[nid, :width] = ids[tab.cols[mpos]]
                wts[nid, :width] = tab.wts[mpos]
                # node at s = -i (angle j + pi): d/dr = -d/ds
                mpos2 = (self.nr - 1) - i
                nid2 = self.node_id(i, j + half)
                cols[nid2, :width] = ids[tab.cols[mpos2]]
                wts[nid2, :width] = tab.wts[mpos2] * ((-1.0) ** k)
        tab = StencilTable(cols, wts, n_cols=self.n_nodes)
        self._tables[key] = tab
        return tab

    def _center_directional(self, k, p):
        """Per-diameter d^k/ds^k stencil rows at the center node."""
        w = k + p
        nline = 2 * self.nr - 1
        half = self.ntheta // 2
        line_tab = _line_stencil(nline, self.dr, k, p)
        mpos = self.nr - 1
        rows = []
        for j in range(half):
            def line_node(mm):
                s = mm - (self.nr - 1)
                if s == 0:
                    return 0
                return self.node_id(s, j) if s > 0 else self.node_id(-s, j + half)
            ids = np.array([line_node(mm) for mm in line_tab.cols[mpos]])
            rows.append((ids, line_tab.wts[mpos]))
        return rows

    def _build_csr(self, name, p):
        n = self.n_nodes
        r = self.node_r.copy()
        r[0] = 1.0  # center rows are overwritten below
        ct, st = np.cos(self.node_theta), np.sin(self.node_theta)
        D = lambda v: sp.diags(v)
        Dr1 = self._radial_table(1, p).to_csr()
        Dth1 = self._theta_table(1, p).to_csr()
        if name in ("dx", "dy"):
            if name == "dx":
                M = D(ct) @ Dr1 + D(-st / r) @ Dth1
            else:
                M = D(st) @ Dr1 + D(ct / r) @ Dth1
        else:
            Dr2 = self._radial_table(2, p).to_csr()
            Dth2 = self._theta_table(2, p).to_csr()
            Drt = 0.5 * (Dr1 @ Dth1 + Dth1 @ Dr1)
            if name == "dxx":
                M = (D(ct * ct) @ Dr2 + D(-2 * st * ct / r) @ Drt
                     + D(st * st / (r * r)) @ Dth2 + D(st * st / r) @ Dr1
                     + D(2 * st * ct / (r * r)) @ Dth1)
            elif name == "dyy":
                M = (D(st * st) @ Dr2 + D(2 * st * ct / r) @ Drt
                     + D(ct * ct / (r * r)) @ Dth2 + D(ct * ct / r) @ Dr1
                     + D(-2 * st * ct / (r * r)) @ Dth1)
            elif name == "dxy":
                M = (D(st * ct) @ Dr2 + D((ct * ct - st * st) / r) @ Drt
                     + D(-st * ct / (r * r)) @ Dth2 + D(-st * ct / r) @ Dr1
                     + D(-(ct * ct - st * st) / (r * r)) @ Dth1)
            else:
                raise KeyError(name)
        M = sp.lil_matrix(M)
        self._set_center_row(M, name, p)
        return M.tocsr()

    def _set_center_row(self, M, name, p):
        """Least-squares combination of diameter stencils at the center."""
        half = self.ntheta // 2
        th = self.thetas[:half]
        if name in ("dx", "dy"):
            rows = self._center_directional(1, p)
            design = np.stack([np.cos(th), np.sin(th)], axis=1)
            comp = {"dx": 0, "dy": 1}[name]
        else:
            rows = self._center_directional(2, p)
            design = np.stack([np.cos(th) ** 2,
                               2 * np.cos(th) * np.sin(th),
                               np.sin(th) ** 2], axis=1)
            comp = {"dxx": 0, "dxy": 1, "dyy": 2}[name]
        coef = np.linalg.pinv(design)[comp]
        M.rows[0] = []
        M.data[0] = []
        acc = {}
        for cj, (ids, wts) in zip(coef, rows):
            for nid, wv in zip(ids, wts):
                acc[int(nid)] = acc.get(int(nid), 0.0) + cj * wv
        for nid in sorted(acc):
            M.rows[0].append(nid)
            M.data[0].append(acc[nid])

    def gradient(self, values, p=2):
        return np.stack([self.deriv_csr("dx", p) @ values,
                         self.deriv_csr("dy", p) @ values], axis=1)

    def hessian(self, values, p=2):
        xx = self.deriv_csr("dxx", p) @ values
        xy = self.deriv_csr("dxy", p) @ values
        yy = self.deriv_csr("dyy", p) @ values
        H = np.empty((self.n_nodes, 2, 2))
        H[:, 0, 0], H[:, 0, 1] = xx, xy
        H[:, 1, 0], H[:, 1, 1] = xy, yy
        return H

    def third(self, values, p=2):
        """Third derivatives by differencing the Hessian, fully symmetrized."""
        H = self.hessian(values, p)
        T = np.empty((self.n_nodes, 2, 2, 2))
        for i in range(2):
            for j in range(i, 2):
                g = self.gradient(H[:, i, j], p)
                T[:, i, j, :] = g
                T[:, j, i, :] = g
        # symmetrize over all index permutations
        T = (T + np.transpose(T, (0, 1, 3, 2)) + np.transpose(T, (0, 2, 1, 3))
             + np.transpose(T, (0, 2, 3, 1)) + np.transpose(T, (0, 3, 1, 2))
             + np.transpose(T, (0, 3, 2, 1))) / 6.0
        return T

    def descriptor(self):
        return {"grid": "disk", "nr": self.nr, "ntheta": self.ntheta,
                "radius": self.R,
                "center": list(self.domain.params["center"])}


def make_grid(domain, nx=None, nr=None, ntheta=None):
    if domain.kind == "interval":
        return IntervalGrid(domain, nx or 201)
    if domain.kind == "radial":
        return RadialGrid(domain, nr or nx or 201)
    if domain.kind == "disk":
        return DiskGrid(domain, nr or 33, ntheta or 64)
    raise GridTooCoarse(f"no grid construction for domain kind {domain.kind!r}")


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

class ScalarField:
    """Grid-sampled scalar with value-semantic snapshots."""

    def __init__(self, grid, values, t=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_nodes,):
            raise ValueError(
                f"value count {values.shape} != node count {grid.n_nodes}")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("field contains NaN/Inf")
        self.grid = grid
        self.values = values
        self.t = t

    def gradient(self, p=2):
        return VectorField(self.grid, gradient(self, p).values, self.t)

    def hessian(self, p=2):
        return SymMatrixField(self.grid, hessian(self, p).values, self.t)

    def __add__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + o, self.t)

    def __sub__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - o, self.t)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c, self.t)

    __rmul__ = __mul__


class VectorField:
    def __init__(self, grid, values, t=None):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != grid.n_nodes or values.ndim != 2:
            raise ValueError("vector field shape mismatch")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("field contains NaN/Inf")
        self.grid = grid
        self.values = values
        self.t = t


class SymMatrixField:
    def __init__(self, grid, values, t=None):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != grid.n_nodes or values.ndim != 3:
            raise ValueError("matrix field shape mismatch")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("field contains NaN/Inf")
        # symmetry is enforced, not assumed
        values = 0.5 * (values + np.transpose(values, (0, 2, 1)))
        self.grid = grid
        self.values = values
        self.t = t


def gradient(f, p=2):
    """Gradient of a scalar field; one-sided stencils at the boundary.

    On interval/radial grids the single component is the x- (or r-)
    derivative; on disk grids the components are Cartesian.
    """
    if p not in (2, 4):
        raise GridTooCoarse(f"spatial order must be 2 or 4, got {p}")
    g = f.grid.gradient(f.values, p)
    return VectorField(f.grid, g.reshape(f.grid.n_nodes, -1), f.t)


def hessian(f, p=2):
    if p not in (2, 4):
        raise GridTooCoarse(f"spatial order must be 2 or 4, got {p}")
    H = f.grid.hessian(f.values, p)
    d = H.shape[-1]
    return SymMatrixField(f.grid, H.reshape(f.grid.n_nodes, d, d), f.t)


def directional_derivative_in_Y(f, chart, k, p=2):
    """k-th normal-collar derivative D_Y^k on the chart's collar patch.

    Y increases toward the boundary (-Y is the boundary distance), so on an
    interval's left chart D_Y = -d/dx while on the right chart D_Y = +d/dx;
    on radial/disk grids D_Y = d/dr.  Returns (values, collar_mask) with
    values zeroed off the collar.
    """
    if k > 4:
        raise CollarUnderResolved("normal derivatives implemented for k <= 4")
    grid = f.grid
    c0 = grid.domain.collar_width
    if isinstance(grid, IntervalGrid):
        n_collar = int(c0 / grid.h)
        if n_collar < 2 * k + 2:
            raise CollarUnderResolved(
                f"collar holds {n_collar} nodes, need {2 * k + 2}")
        dk = grid.deriv(f.values, k, p)
        sign = 1.0 if chart.center == grid.domain.params["b"] else (-1.0) ** k
        vals = sign * dk
    elif isinstance(grid, (RadialGrid, DiskGrid)):
        nstep = grid.h if isinstance(grid, RadialGrid) else grid.dr
        if int(c0 / nstep) < 2 * k + 2:
            raise CollarUnderResolved("collar under-resolved in the radius")
        if isinstance(grid, RadialGrid):
            vals = grid.deriv(f.values, k, p)
        else:
            vals = grid._radial_table(k, p).apply(f.values)
    else:
        raise CollarUnderResolved("no collar derivative for this grid")
    pts = grid.points if grid.points.ndim > 1 else grid.points
    mask = np.asarray(chart.contains(pts)).reshape(-1)
    out = np.where(mask, vals, 0.0)
    return ScalarField(grid, out, f.t), mask


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def write_field(field, basepath):
    """CSV (node index, coordinates, value) plus a JSON grid header."""
    grid = field.grid
    coords = grid.coords
    ncoord = coords.shape[1]
    header = "idx," + ",".join(f"x{c}" for c in range(ncoord)) + ",value"
    with open(f"{basepath}.csv", "w") as fh:
        fh.write(header + "\n")
        for i in range(grid.n_nodes):
            cs = ",".join(repr(float(c)) for c in coords[i])
            fh.write(f"{i},{cs},{float(field.values[i])!r}\n")
    meta = {"descriptor": grid.descriptor(), "t": field.t}
    with open(f"{basepath}.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def read_field_values(csvpath):
    data = np.loadtxt(csvpath, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:-1], data[:, -1]
