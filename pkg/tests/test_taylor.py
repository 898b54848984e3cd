import numpy as np
import pytest

from conftest import make_barenblatt_problem
from pmefront.errors import ConfigInvalid, JetNotFlat, TubeExceeded
from pmefront.fields import fd_weights
from pmefront.taylor import (build_htilde, formal_coefficients,
                             jet_div, jet_mul, residual_jet,
                             residual_time_series, time_shift_rho)
from pmefront.transform import HState, evaluate_F


class TestJetArithmetic:
    def test_mul_matches_polynomial_product(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 7))
        b = rng.normal(size=(4, 7))
        c = jet_mul(a, b)
        t = 0.37
        pa = sum(a[k] * t ** k for k in range(4))
        pb = sum(b[k] * t ** k for k in range(4))
        pc = sum(c[k] * t ** k for k in range(4))
        full = pa * pb
        # агree through the truncation order
        resid = full - pc
        tail = sum(abs(t) ** k for k in range(4, 7))
        assert np.abs(resid).max() <= tail * np.abs(a).max() * np.abs(b).max()

    def test_div_inverts_mul(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(5, 3))
        b = rng.normal(size=(5, 3))
        b[0] = 1.0 + np.abs(b[0])
        np.testing.assert_allclose(jet_div(jet_mul(a, b), b), a, atol=1e-12)


class TestFormalCoefficients:
    def test_a0_always_zero(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=2)
        assert np.abs(fs.a[0].values).max() == 0.0

    def test_a1_is_F_at_zero(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=1)
        F0 = evaluate_F(prob, HState.zero(prob)).values
        np.testing.assert_allclose(fs.a[1].values, F0, atol=1e-14)

    def test_a1_closed_form(self):
        # a_1 = ((m-1) v0 lap v0 + |grad v0|^2) / (v0 + |grad v0|^2)
        sol, prob = make_barenblatt_problem(1.7, 201)
        fs = formal_coefficients(prob, K=1)
        v0 = prob.v0_data.values
        u = prob.v0_data.grad[:, 0]
        lap = prob.v0_data.hess[:, 0, 0]
        expect = ((0.7) * v0 * lap + u * u) / (v0 + u * u)
        np.testing.assert_allclose(fs.a[1].values, expect, atol=1e-12)

    def test_a12_match_exact_height_time_derivatives(self, barenblatt_m2):
        sol, prob = barenblatt_m2
        x = prob.grid.points
        fs = formal_coefficients(prob, K=2)

        def h(t):
            return sol.exact_height(x, 1.0 + t)

        d = 1e-3
        c1 = (h(d) - h(-d)) / (2 * d)
        c1h = (h(d / 2) - h(-d / 2)) / d
        a1 = (4 * c1h - c1) / 3.0
        c2 = (h(d) - 2 * h(0) + h(-d)) / d ** 2
        c2h = (h(d / 2) - 2 * h(0) + h(-d / 2)) / (d / 2) ** 2
        a2 = (4 * c2h - c2) / 3.0
        assert np.abs(fs.a[1].values - a1).max() / np.abs(a1).max() <= 1e-4
        assert np.abs(fs.a[2].values - a2).max() / np.abs(a2).max() <= 1e-2

    def test_taylor_mode_vs_ode_flow_richardson(self):
        # two independent computations of a_j: jet recursion vs repeated
        # Richardson-extrapolated time differences of the RK4 flow of
        # h_t = F(h)
        sol, prob = make_barenblatt_problem(2.0, 101)
        fs = formal_coefficients(prob, K=3, p=2)

        def F(hvals, t):
            hs = HState.zero(prob).with_values(hvals, max(t, 1e-9))
            return evaluate_F(prob, hs, p=2).values

        def flow(t_end, dt):
            h = np.zeros(prob.grid.n_nodes)
            n = int(round(t_end / dt))
            t = 0.0
            for _ in range(n):
                k1 = F(h, t)
                k2 = F(h + 0.5 * dt * k1, t)
                k3 = F(h + 0.5 * dt * k2, t)
                k4 = F(h + dt * k3, t)
                h = h + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += dt
            return h

        def derivative_estimates(delta):
            npts = 8
            ts = delta * np.arange(npts)
            samples = [np.zeros(prob.grid.n_nodes)]
            for tv in ts[1:]:
                samples.append(flow(tv, delta / 50.0))
            samples = np.stack(samples)
            return {j: np.einsum("s,sx->x", fd_weights(0.0, ts, j)[j],
                                 samples) for j in (1, 2, 3)}

        est = derivative_estimates(6e-3)
        est_half = derivative_estimates(3e-3)
        for j in (1, 2, 3):
            # Richardson on the stencil scale (order-5 exactness)
            extrap = (32 * est_half[j] - est[j]) / 31.0
            ref = fs.a[j].values
            rel = np.abs(extrap - ref).max() / max(np.abs(ref).max(), 1e-12)
            assert rel <= 1e-5, f"j={j}: rel={rel:.2e}"


class TestHTilde:
    def test_zero_at_zero(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        assert np.abs(ht.values(0.0)).max() == 0.0

    def test_K1_single_term(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=1)
        ht = build_htilde(fs, T=0.3)
        t = 0.05  # inside the cutoff plateau
        np.testing.assert_allclose(ht.values(t), t * fs.a[1].values,
                                   atol=1e-14)

    def test_truncation_order(self):
        sol, prob = make_barenblatt_problem(2.0, 801)
        fs = formal_coefficients(prob, K=3, p=4)
        ht = build_htilde(fs, T=0.3)
        x = prob.grid.points
        errs = [np.abs(ht.values(t) - sol.exact_height(x, 1 + t)).max()
                for t in (0.12, 0.06, 0.03)]
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 3.8  # K + 0.8

    def test_sup_bound_by_coefficients(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=3)
        T = 0.2
        ht = build_htilde(fs, T)
        from math import factorial
        bound = sum(np.abs(fs.a[j].values).max() * T ** j / factorial(j)
                    for j in range(4))
        probe = max(np.abs(ht.values(t)).max()
                    for t in np.linspace(0, T, 41))
        assert probe <= bound + 1e-15

    def test_tube_exceeded_for_large_T(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=3)
        with pytest.raises(TubeExceeded):
            build_htilde(fs, T=5.0)


class TestResidualJet:
    def test_flat_orders_vanish(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        norms, scale = residual_jet(prob, ht, j_max=2)
        for j in (0, 1, 2):
            assert norms[j] <= 1e-6 * scale

    def test_negative_control_K1(self, barenblatt_m2):
        # K = 1 truncation: the first-derivative jet must NOT vanish
        _, prob = barenblatt_m2
        ht1 = build_htilde(formal_coefficients(prob, K=1), T=0.25)
        ts = 0.01 * np.arange(5)
        series = residual_time_series(prob, ht1, ts)
        w = fd_weights(0.0, ts, 1)[1]
        norm1 = np.abs(np.einsum("s,sx->x", w, series)).max()
        assert norm1 >= 0.1

    def test_exact_height_residual_small(self, barenblatt_m2):
        # Phi(h_exact) is zero up to discretization error at every probe t
        sol, prob = barenblatt_m2
        x = prob.grid.points
        dtp = 1e-4
        for t in (0.01, 0.05, 0.1):
            h = sol.exact_height(x, 1 + t)
            hs = HState.zero(prob).with_values(h, t)
            ht_fd = (sol.exact_height(x, 1 + t + dtp)
                     - sol.exact_height(x, 1 + t - dtp)) / (2 * dtp)
            resid = ht_fd - evaluate_F(prob, hs).values
            assert np.abs(resid).max() <= 1e-3

    def test_jmax_capped(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=2), T=0.25)
        with pytest.raises(ConfigInvalid):
            residual_jet(prob, ht, j_max=2)


class TestTimeShift:
    def test_zero_before_shift(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        rho = time_shift_rho(prob, ht, 0.05)
        assert np.abs(rho.values(0.049)).max() == 0.0
        assert np.abs(rho.values(0.0)).max() == 0.0

    def test_continuity_at_shift(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        rho = time_shift_rho(prob, ht, 0.05)
        norms, scale = residual_jet(prob, ht, j_max=0)
        jump = np.abs(rho.values(0.05 + 1e-12)).max()
        assert jump <= max(norms[0], 1e-6 * scale)

    def test_shift_refinement(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        tgrid = np.linspace(0.0, 0.2, 21)
        ref = residual_time_series(prob, ht, tgrid)
        gaps = []
        for eps in (0.04, 0.02, 0.01):
            rho = time_shift_rho(prob, ht, eps)
            gaps.append(max(np.abs(rho.values(t) - ref[i]).max()
                            for i, t in enumerate(tgrid)))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_jet_not_flat_for_K1(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht1 = build_htilde(formal_coefficients(prob, K=1), T=0.25)
        with pytest.raises(JetNotFlat):
            time_shift_rho(prob, ht1, 0.05)

    def test_shift_range_validated(self, barenblatt_m2):
        _, prob = barenblatt_m2
        ht = build_htilde(formal_coefficients(prob, K=3), T=0.25)
        with pytest.raises(ConfigInvalid):
            time_shift_rho(prob, ht, 0.2)
