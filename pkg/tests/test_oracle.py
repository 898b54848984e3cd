import numpy as np
import pytest

from pmefront.domain import Domain
from pmefront.errors import NotFlatAtZero
from pmefront.fichera import LinearCoefficients, check_condition_C
from pmefront.fields import IntervalGrid
from pmefront.oracle import (exp_flat_profile, mms_linear, power_profile,
                             quadratic_pressure_1d, quadratic_pressure_radial,
                             sine_bump_profile)


class TestQuadraticPressure1D:
    def test_m2_values_at_t1(self):
        sol = quadratic_pressure_1d(2.0, 1.0)
        # v(x, 1) = 1 - x^2/6 and R(1) = sqrt(6)
        assert sol.B(1.0) == pytest.approx(1.0 / 6.0)
        assert sol.v(np.array([0.5]), 1.0)[0] == pytest.approx(1 - 0.25 / 6)
        assert sol.R(1.0) == pytest.approx(np.sqrt(6.0))

    def test_front_exponent(self):
        sol = quadratic_pressure_1d(2.0, 1.0)
        ts = np.array([1.0, 2.0, 4.0, 8.0])
        slopes = np.diff(np.log(sol.R(ts))) / np.diff(np.log(ts))
        np.testing.assert_allclose(slopes, 1.0 / 3.0, rtol=1e-12)
        assert sol.front_exponent == pytest.approx(1.0 / 3.0)

    def test_nondegenerate_at_front(self):
        sol = quadratic_pressure_1d(1.7, 2.0)
        for t in (1.0, 1.5, 3.0):
            speed = 2.0 * sol.B(t) * sol.R(t)
            assert speed > 0
            assert sol.R_dot(t) == pytest.approx(speed, rel=1e-12)

    def test_residual_selfcheck_runs(self):
        # the constructor self-check raises on any residual above 1e-10
        quadratic_pressure_1d(1.5, 0.7)
        quadratic_pressure_1d(3.0, 2.0)

    def test_exact_height_center_and_zero(self):
        sol = quadratic_pressure_1d(2.0, 1.0)
        x = np.linspace(-1.0, 1.0, 11)
        np.testing.assert_allclose(sol.exact_height(x, 1.0), 0.0, atol=1e-14)
        # at the critical point the segment is vertical: h = A(t)/A0 - 1
        h0 = sol.exact_height(np.array([0.0]), 1.3)[0]
        assert h0 == pytest.approx(sol.A(1.3) / sol.A(1.0) - 1.0, rel=1e-12)


class TestQuadraticPressureRadial:
    def test_n1_reduces_to_1d(self):
        s1 = quadratic_pressure_1d(1.8, 1.3)
        sr = quadratic_pressure_radial(1.8, 1, 1.3)
        ts = np.array([1.0, 2.5, 7.0])
        np.testing.assert_allclose(s1.A(ts), sr.A(ts), rtol=1e-14)
        np.testing.assert_allclose(s1.B(ts), sr.B(ts), rtol=1e-14)

    def test_n2_selfcheck(self):
        quadratic_pressure_radial(2.0, 2, 1.0)

    def test_radius_monotone(self):
        sol = quadratic_pressure_radial(2.0, 2, 1.0)
        ts = np.linspace(1.0, 5.0, 50)
        assert np.all(np.diff(sol.R(ts)) > 0)


class TestMMSLinear:
    def _coeffs(self, grid):
        x = grid.points
        return LinearCoefficients(grid, (x * (1 - x))[:, None, None],
                                  np.zeros((grid.nx, 1)), np.zeros(grid.nx))

    def test_zero_solution_zero_forcing(self, unit_interval):
        g = IntervalGrid(unit_interval, 51)
        coeffs = self._coeffs(g)

        class ZeroProfile:
            label = "0"
            flat_through = np.inf

            def __call__(self, t):
                return 0.0

            def fn(self, t):
                return 0.0

            def dfn(self, t):
                return 0.0

        mms = mms_linear(g, coeffs, ZeroProfile(), sine_bump_profile(0, 1))
        np.testing.assert_allclose(mms.g(0.3), 0.0, atol=1e-15)

    def test_power_profile_rejected(self, unit_interval):
        g = IntervalGrid(unit_interval, 51)
        coeffs = self._coeffs(g)
        with pytest.raises(NotFlatAtZero):
            mms_linear(g, coeffs, power_profile(2), sine_bump_profile(0, 1),
                       k_max=2)

    def test_power_profile_allowed_at_higher_order(self, unit_interval):
        g = IntervalGrid(unit_interval, 51)
        mms = mms_linear(g, self._coeffs(g), power_profile(3),
                         sine_bump_profile(0, 1), k_max=2)
        assert mms.w_exact(0.0) == pytest.approx(0.0)

    def test_exp_profile_passes_condition_C(self, unit_interval):
        g = IntervalGrid(unit_interval, 101)
        mms = mms_linear(g, self._coeffs(g), exp_flat_profile(),
                         sine_bump_profile(0, 1), k_max=2)
        ok, _ = check_condition_C(mms.g, k_max=4)
        assert ok

    def test_forcing_consistency(self, unit_interval):
        # g must equal w_t - L w computed independently by time FD
        g = IntervalGrid(unit_interval, 101)
        coeffs = self._coeffs(g)
        mms = mms_linear(g, coeffs, exp_flat_profile(),
                         sine_bump_profile(0, 1))
        t, dt = 0.4, 1e-6
        w_t = (mms.w_exact(t + dt) - mms.w_exact(t - dt)) / (2 * dt)
        snap = coeffs.at(t)
        x = g.points
        phi = sine_bump_profile(0, 1)
        Lw = snap.a[:, 0, 0] * mms.T(t) * phi.d2phi(x)
        np.testing.assert_allclose(mms.g(t), w_t - Lw, atol=1e-9)
