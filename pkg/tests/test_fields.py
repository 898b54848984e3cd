import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmefront.domain import Domain, build_charts
from pmefront.errors import CollarUnderResolved, GridTooCoarse
from pmefront.fields import (DiskGrid, IntervalGrid, RadialGrid, ScalarField,
                             directional_derivative_in_Y, fd_weights,
                             gradient, hessian, read_field_values,
                             write_field)


def test_fd_weights_classics():
    w = fd_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    np.testing.assert_allclose(w[1], [-0.5, 0.0, 0.5])
    np.testing.assert_allclose(w[2], [1.0, -2.0, 1.0])
    # one-sided first derivative, order 2
    w = fd_weights(0.0, np.array([0.0, 1.0, 2.0]), 1)
    np.testing.assert_allclose(w[1], [-1.5, 2.0, -0.5])


class TestIntervalCalculus:
    def setup_method(self):
        self.dom = Domain.interval(0.0, 1.0)

    def test_quadratic_gradient_exact(self):
        g = IntervalGrid(self.dom, 101)
        f = ScalarField(g, g.points ** 2)
        gr = gradient(f)
        assert gr.values[50, 0] == pytest.approx(1.0, abs=1e-13)
        np.testing.assert_allclose(gr.values[:, 0], 2 * g.points, atol=1e-12)

    def test_constant_gradient_zero(self):
        # zero relative to the stencil weight scale (one-sided rows are
        # O(1/h), so machine-level cancellation is ~1e-16/h)
        g = IntervalGrid(self.dom, 51)
        f = ScalarField(g, np.ones(51))
        np.testing.assert_allclose(gradient(f).values, 0.0, atol=1e-12)

    @pytest.mark.parametrize("p,expected", [(2, 1.9), (4, 3.9)])
    def test_gradient_convergence_order(self, p, expected):
        errs = []
        for nx in (101, 201, 401):
            g = IntervalGrid(self.dom, nx)
            f = ScalarField(g, np.sin(3.0 * g.points))
            err = np.abs(gradient(f, p).values[:, 0]
                         - 3.0 * np.cos(3.0 * g.points)).max()
            errs.append(err)
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= expected

    def test_hessian_convergence_order(self):
        errs = []
        for nx in (101, 201, 401):
            g = IntervalGrid(self.dom, nx)
            f = ScalarField(g, np.exp(g.points))
            errs.append(np.abs(hessian(f).values[:, 0, 0]
                               - np.exp(g.points)).max())
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 1.9

    @given(alpha=st.floats(-5, 5), beta=st.floats(-5, 5))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, alpha, beta):
        g = IntervalGrid(self.dom, 64)
        f1 = np.sin(2 * g.points)
        f2 = np.cos(5 * g.points)
        lhs = gradient(ScalarField(g, alpha * f1 + beta * f2)).values
        rhs = (alpha * gradient(ScalarField(g, f1)).values
               + beta * gradient(ScalarField(g, f2)).values)
        scale = max(1.0, np.abs(rhs).max())
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale

    def test_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            IntervalGrid(self.dom, 3)


class TestDiskCalculus:
    def test_quadratic_hessian_exact(self, disk_grid):
        f = ScalarField(disk_grid, (disk_grid.points ** 2).sum(axis=1))
        H = hessian(f).values
        np.testing.assert_allclose(H, np.broadcast_to(
            2 * np.eye(2), H.shape), atol=1e-11)

    def test_linear_hessian_zero(self, disk_grid):
        f = ScalarField(disk_grid, 3.0 * disk_grid.points[:, 0]
                        - disk_grid.points[:, 1])
        np.testing.assert_allclose(hessian(f).values, 0.0, atol=1e-10)
        g = gradient(f).values
        np.testing.assert_allclose(g, np.broadcast_to([3.0, -1.0], g.shape),
                                   atol=1e-11)

    def test_hessian_symmetry_exact(self, disk_grid):
        rng = np.random.default_rng(0)
        f = ScalarField(disk_grid, rng.normal(size=disk_grid.n_nodes))
        H = hessian(f).values
        np.testing.assert_array_equal(H[:, 0, 1], H[:, 1, 0])

    def test_convergence_order_exp_cos(self, disk_domain):
        errs = []
        for nr, nt in ((33, 64), (65, 128)):
            g = DiskGrid(disk_domain, nr, nt)
            x, y = g.points[:, 0], g.points[:, 1]
            H = hessian(ScalarField(g, np.exp(x) * np.cos(y))).values
            He = np.empty_like(H)
            He[:, 0, 0] = np.exp(x) * np.cos(y)
            He[:, 0, 1] = He[:, 1, 0] = -np.exp(x) * np.sin(y)
            He[:, 1, 1] = -np.exp(x) * np.cos(y)
            errs.append(np.abs(H - He).max())
        assert np.log2(errs[0] / errs[1]) >= 1.9


class TestRadialCalculus:
    def test_even_fold_at_center(self):
        g = RadialGrid(Domain.radial(2, 1.0), 101)
        f = ScalarField(g, g.points ** 2)
        d1 = g.deriv(f.values, 1)
        assert d1[0] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(d1, 2 * g.points, atol=1e-12)
        np.testing.assert_allclose(g.deriv(f.values, 2), 2.0, atol=1e-10)

    def test_ball_quadrature(self):
        g = RadialGrid(Domain.radial(3, 1.0), 201)
        vol = g.quad_weights.sum()
        assert vol == pytest.approx(4.0 * np.pi / 3.0, rel=1e-12)


class TestDirectionalDerivativeInY:
    def test_distance_field(self, unit_interval):
        g = IntervalGrid(unit_interval, 201)
        charts, _ = build_charts(unit_interval)
        dist = np.minimum(g.points, 1.0 - g.points)
        f = ScalarField(g, dist)
        for ch in charts:
            vals, mask = directional_derivative_in_Y(f, ch, 1)
            # Y = -distance, so D_Y(distance) = -1 on the collar
            np.testing.assert_allclose(vals.values[mask], -1.0, atol=1e-10)

    def test_constant(self, unit_interval):
        g = IntervalGrid(unit_interval, 101)
        charts, _ = build_charts(unit_interval)
        f = ScalarField(g, np.full(101, 3.3))
        for k in (1, 2, 3):
            vals, mask = directional_derivative_in_Y(f, charts[0], k)
            np.testing.assert_allclose(vals.values[mask], 0.0, atol=1e-8)

    def test_quadratic_in_Y(self, unit_interval):
        # f = Y^2 near the right endpoint: D_Y^2 f = 2
        g = IntervalGrid(unit_interval, 201)
        charts, _ = build_charts(unit_interval)
        f = ScalarField(g, (g.points - 1.0) ** 2)
        vals, mask = directional_derivative_in_Y(f, charts[1], 2)
        np.testing.assert_allclose(vals.values[mask], 2.0, atol=1e-9)

    def test_disk_radial_direction(self, disk_grid):
        f = ScalarField(disk_grid, disk_grid.node_r ** 2)
        charts, _ = build_charts(disk_grid.domain, 4)
        vals, mask = directional_derivative_in_Y(f, charts[0], 1)
        np.testing.assert_allclose(vals.values[mask],
                                   2 * disk_grid.node_r[mask], atol=1e-9)

    def test_under_resolved(self, unit_interval):
        g = IntervalGrid(unit_interval, 12)
        charts, _ = build_charts(unit_interval)
        f = ScalarField(g, g.points)
        with pytest.raises(CollarUnderResolved):
            directional_derivative_in_Y(f, charts[0], 4)


def test_field_serialization_roundtrip(tmp_path, unit_interval):
    g = IntervalGrid(unit_interval, 33)
    f = ScalarField(g, np.sin(g.points), t=0.75)
    write_field(f, tmp_path / "w")
    coords, vals = read_field_values(tmp_path / "w.csv")
    np.testing.assert_array_equal(vals, f.values)
    np.testing.assert_array_equal(coords[:, 0], g.points)
    import json
    meta = json.loads((tmp_path / "w.json").read_text())
    assert meta["t"] == 0.75
    assert meta["descriptor"]["grid"] == "interval"


def test_nan_rejected(unit_interval):
    g = IntervalGrid(unit_interval, 16)
    vals = np.zeros(16)
    vals[3] = np.nan
    with pytest.raises(FloatingPointError):
        ScalarField(g, vals)
