import numpy as np
import pytest
import scipy.sparse as sp
from scipy.integrate import quad

from pmefront.domain import Domain, build_charts
from pmefront.errors import (ConfigInvalid, LinearSolveFailed,
                             PreconditionRefused)
from pmefront.fichera import LinearCoefficients
from pmefront.fields import IntervalGrid, ScalarField
from pmefront.linsolve import (LinearRunConfig, LinearSolver, energy_I_k,
                               solve_linear, step_linear,
                               step_regularized_1d, _solve_1d_banded)
from pmefront.oracle import (exp_flat_profile, gaussian_profile, mms_linear,
                             sine_bump_profile, sine_profile)


def bump_coeffs(grid):
    x = grid.points
    return LinearCoefficients(grid, (x * (1 - x))[:, None, None],
                              np.zeros((grid.nx, 1)), np.zeros(grid.nx))


def mms_setup(nx, spatial=None, T_profile=None):
    dom = Domain.interval(0.0, 1.0)
    g = IntervalGrid(dom, nx)
    coeffs = bump_coeffs(g)
    mms = mms_linear(g, coeffs, T_profile or exp_flat_profile(),
                     spatial or sine_bump_profile(0, 1), k_max=2)
    return g, mms, mms.with_g()


class TestStepAndSolve:
    def test_zero_forcing_stays_zero(self):
        g, _, _ = mms_setup(101)
        lc = bump_coeffs(g).replace_g(lambda t: np.zeros(101))
        run = solve_linear(lc, LinearRunConfig(dt=1e-3, T=0.2))
        assert np.abs(run.w_final).max() <= 1e-12
        assert max(run.energy.I1) <= 1e-12

    def test_mms_spatial_convergence(self):
        errs = []
        for nx in (51, 101, 201, 401):
            _, mms, lcg = mms_setup(nx)
            cfg = LinearRunConfig(dt=2e-3, T=0.5, theta=0.5,
                                  energy_stride=250)
            run = solve_linear(lcg, cfg)
            errs.append(np.abs(run.w_final - mms.w_exact(0.5)).max())
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(3)]
        assert min(orders) >= 1.8

    def test_solution_flat_at_zero(self):
        # condition (C) holds, so w inherits flatness: w(t) -> 0 fast as t -> 0
        _, mms, lcg = mms_setup(201)
        sups = []
        for T in (0.2, 0.1, 0.05):
            run = solve_linear(lcg, LinearRunConfig(dt=2.5e-4, T=T,
                                                    energy_stride=400))
            sups.append(np.abs(run.w_final).max())
        # exp(-1/t) decays faster than any power: successive ratios shrink
        assert sups[1] / sups[0] < 0.1
        assert sups[2] / sups[1] < 0.05

    def test_heat_kernel_reference(self):
        # nondegenerate sanity: a = 1 on a large interval versus the exact
        # Duhamel solution with a Gaussian source (heat-kernel convolution
        # in closed form, quadrature in time); needs force (A1 fails)
        L, sigma, T = 6.0, 0.5, 0.25
        dom = Domain.interval(-L, L)
        g = IntervalGrid(dom, 601)
        lc = LinearCoefficients(g, np.ones((601, 1, 1)), np.zeros((601, 1)),
                                np.zeros(601))
        phi = gaussian_profile(0.0, sigma)
        lcg = lc.replace_g(lambda t: phi.phi(g.points))
        run = solve_linear(lcg, LinearRunConfig(dt=5e-4, T=T, theta=0.5,
                                                force=True,
                                                energy_stride=500))

        def w_exact(x, t):
            def integrand(s):
                var = sigma ** 2 + 2.0 * (t - s)
                return sigma / np.sqrt(var) * np.exp(-x ** 2 / (2 * var))

            return quad(integrand, 0.0, t, limit=200)[0]

        xs = np.linspace(-2.0, 2.0, 9)
        exact = np.array([w_exact(x, T) for x in xs])
        num = np.interp(xs, g.points, run.w_final)
        assert np.abs(num - exact).max() / np.abs(exact).max() <= 1e-3

    def test_refuses_without_gate(self):
        dom = Domain.interval(0.0, 1.0)
        g = IntervalGrid(dom, 51)
        lc = LinearCoefficients(g, np.ones((51, 1, 1)), np.zeros((51, 1)),
                                np.zeros(51)).replace_g(
            lambda t: np.zeros(51))
        with pytest.raises(PreconditionRefused):
            solve_linear(lc, LinearRunConfig(dt=1e-3, T=0.01))

    def test_comparison_principle(self):
        # f <= 0, g1 <= g2 pointwise implies w1 <= w2 up to tolerance
        g, mms, _ = mms_setup(101)
        base = bump_coeffs(g)
        phi = np.sin(np.pi * g.points) ** 2

        def g1(t):
            return 0.5 * phi

        def g2(t):
            return 0.5 * phi + 0.2 * phi

        cfg = LinearRunConfig(dt=1e-3, T=0.2, energy_stride=200)
        w1 = solve_linear(base.replace_g(g1), cfg).w_final
        w2 = solve_linear(base.replace_g(g2), cfg).w_final
        assert np.max(w1 - w2) <= 1e-8

    def test_theta_methods_agree(self):
        _, mms, lcg = mms_setup(201)
        out = {}
        for theta in (1.0, 0.5):
            cfg = LinearRunConfig(dt=2e-4, T=0.3, theta=theta,
                                  energy_stride=300)
            out[theta] = solve_linear(lcg, cfg).w_final
        assert np.abs(out[1.0] - out[0.5]).max() <= 1e-4

    def test_step_linear_functional(self):
        g, mms, lcg = mms_setup(101)
        w0 = ScalarField(g, np.zeros(101), t=0.0)
        cfg = LinearRunConfig(dt=1e-3, T=1e-3)
        w1 = step_linear(lcg, w0, 0.0, cfg)
        assert w1.t == pytest.approx(1e-3)
        assert np.all(np.isfinite(w1.values))

    def test_banded_failure_reports_condition(self):
        M = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(LinearSolveFailed) as exc:
            _solve_1d_banded(M, np.ones(2))
        assert exc.value.condition_estimate is not None


class TestRegularized:
    def test_epsilon_zero_matches_plain(self):
        g, mms, lcg = mms_setup(101)
        w0 = ScalarField(g, np.zeros(101), t=0.0)
        cfg0 = LinearRunConfig(dt=1e-3, T=1e-3)
        cfgr = LinearRunConfig(dt=1e-3, T=1e-3, epsilon=0.0, N_reg=1)
        a = step_linear(lcg, w0, 0.0, cfg0)
        b = step_regularized_1d(lcg, w0, 0.0, cfgr)
        assert np.abs(a.values - b.values).max() <= 1e-12

    def test_epsilon_refinement_monotone(self):
        _, mms, lcg = mms_setup(201)

        def run(eps, N=1):
            cfg = LinearRunConfig(dt=1e-3, T=0.4, epsilon=eps, N_reg=N,
                                  energy_stride=400)
            return solve_linear(lcg, cfg).w_final

        ref = run(0.0)
        disc_err = np.abs(ref - mms.w_exact(0.4)).max()
        gaps = [np.abs(run(eps) - ref).max() for eps in (1e-2, 1e-3, 1e-4)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] <= 5.0 * disc_err

    def test_N2_constrains_higher_derivatives_only(self):
        # with data whose boundary slope is nonzero, constraining only the
        # 2nd/3rd derivatives (N=2) leaves the boundary value closer to the
        # eps = 0 run than constraining the slope (N=1)
        _, mms, lcg = mms_setup(201, spatial=sine_profile(0, 1))

        def run(eps, N):
            cfg = LinearRunConfig(dt=1e-3, T=0.4, epsilon=eps, N_reg=N,
                                  energy_stride=400)
            return solve_linear(lcg, cfg).w_final

        ref = run(0.0, 1)
        for eps in (1e-3, 1e-4):
            d1 = max(abs(run(eps, 1)[0] - ref[0]),
                     abs(run(eps, 1)[-1] - ref[-1]))
            d2 = max(abs(run(eps, 2)[0] - ref[0]),
                     abs(run(eps, 2)[-1] - ref[-1]))
            assert d2 < d1

    def test_regularization_needs_1d(self):
        with pytest.raises(ConfigInvalid):
            LinearRunConfig(dt=1e-3, T=0.1, epsilon=1e-3, N_reg=3)


class TestEnergies:
    def test_zero_field(self, unit_interval):
        g = IntervalGrid(unit_interval, 101)
        charts, pou = build_charts(unit_interval)
        z = ScalarField(g, np.zeros(101))
        for k in (0, 1, 2):
            assert energy_I_k(z, unit_interval, charts, pou, k) == 0.0

    def test_constant_field_I1(self, unit_interval):
        # gradient terms vanish; I_1 = int w^2 = |domain|
        g = IntervalGrid(unit_interval, 201)
        charts, pou = build_charts(unit_interval)
        one = ScalarField(g, np.ones(201))
        assert energy_I_k(one, unit_interval, charts, pou, 1) \
            == pytest.approx(1.0, rel=1e-10)

    def test_distance_field_closed_form(self, unit_interval):
        # w = dist: D_Y w = -1 on the collars, so the collar term is
        # 2 int_0^{c0} d eta(d)^2 dd in chart coordinates; compared against
        # adaptive quadrature of the analytic cutoff profile
        g = IntervalGrid(unit_interval, 801)
        charts, pou = build_charts(unit_interval)
        dist = np.minimum(g.points, 1 - g.points)
        val, parts = energy_I_k(ScalarField(g, dist), unit_interval, charts,
                                pou, 1, return_parts=True)

        c0 = unit_interval.collar_width
        eta = lambda d: pou._eta(np.array([d]))[0]
        collar_oracle = 2.0 * quad(lambda d: d * eta(d) ** 2, 0, c0,
                                   limit=200)[0]
        assert parts["collar"] == pytest.approx(collar_oracle, abs=1e-6)
        # the full value agrees with the analytic integral up to the kink
        # of |x - 1/2| under the interior derivative term (O(h) there)
        int_w2 = quad(lambda x: min(x, 1 - x) ** 2, 0, 1)[0]
        interior = quad(lambda x: (1 - eta(min(x, 1 - x))) ** 2, 0, 1,
                        limit=200)[0]
        assert val == pytest.approx(int_w2 + collar_oracle + interior,
                                    abs=3e-3)

    def test_gronwall_envelope(self):
        _, mms, lcg = mms_setup(201)
        run = solve_linear(lcg, LinearRunConfig(dt=1e-3, T=0.4,
                                                energy_stride=10))
        C = run.gronwall_C
        assert np.isfinite(C) and C >= 0.0
        # e^{-Ct}(I1 + 1) must be nonincreasing with the fitted C
        ts = np.asarray(run.energy.ts)
        I1 = np.asarray(run.energy.I1)
        env = np.exp(-C * ts) * (I1 + 1.0)
        assert np.all(np.diff(env) <= 1e-12)

    def test_pme_linearized_forced_run_bounded(self):
        # linearized PME coefficients at h = 0 with manufactured forcing:
        # the run exists and stays bounded with a finite Gronwall constant
        from conftest import make_barenblatt_problem
        from pmefront.transform import HState, linearize_F
        sol, prob = make_barenblatt_problem(2.0, 201)
        coeffs = linearize_F(prob, HState.zero(prob))
        phi = np.cos(prob.grid.points)

        def gf(t):
            return np.exp(-1.0 / t) * phi if t > 0 else 0.0 * phi

        run = solve_linear(coeffs.replace_g(gf),
                           LinearRunConfig(dt=1e-3, T=0.4, energy_stride=20))
        assert np.isfinite(run.w_final).all()
        assert np.isfinite(run.gronwall_C)
