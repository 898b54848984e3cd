import numpy as np
import pytest

from conftest import make_barenblatt_problem
from pmefront.domain import Domain
from pmefront.errors import PreconditionRefused
from pmefront.fields import DiskGrid, RadialGrid, ScalarField
from pmefront.oracle import quadratic_pressure_radial
from pmefront.pme import (PMERunConfig, front_speed_check, solve_pme,
                          step_pme)
from pmefront.taylor import build_htilde, formal_coefficients
from pmefront.transform import HState, evaluate_F


class TestStepPME:
    def test_stationary_when_F_vanishes(self, barenblatt_m2, monkeypatch):
        # with zero right-hand side the semi-implicit update must return
        # the same state: (I - theta dt L) delta = 0 => delta = 0
        import pmefront.pme as pme_mod
        _, prob = barenblatt_m2
        h0 = HState.zero(prob)

        real_evaluate = pme_mod.evaluate_F

        def zero_F(problem, hstate, p=2, state=None):
            f = real_evaluate(problem, hstate, p, state)
            return ScalarField(f.grid, np.zeros_like(f.values), t=f.t)

        monkeypatch.setattr(pme_mod, "evaluate_F", zero_F)
        h1 = step_pme(prob, h0, PMERunConfig(dt=1e-3, T=1e-3))
        np.testing.assert_array_equal(h1.h.values, h0.h.values)

    def test_one_step_accuracy_vs_exact(self):
        sol, prob = make_barenblatt_problem(2.0, 201)
        cfg = PMERunConfig(dt=1e-3, T=0.1)
        h = HState.zero(prob)
        while h.t < 0.1 - 1e-12:
            h = step_pme(prob, h, cfg)
        hex = sol.exact_height(prob.grid.points, 1.0 + h.t)
        assert np.abs(h.h.values - hex).max() <= 5e-3

    def test_m3_refused_without_force(self):
        sol, prob = make_barenblatt_problem(3.0, 101)
        with pytest.raises(PreconditionRefused) as exc:
            step_pme(prob, HState.zero(prob), PMERunConfig(dt=1e-4, T=1e-4))
        assert "(B)" in str(exc.value)

    def test_m3_forced_proceeds(self):
        sol, prob = make_barenblatt_problem(3.0, 101)
        cfg = PMERunConfig(dt=1e-4, T=1e-4, force=True)
        h1, rep, gate = step_pme(prob, HState.zero(prob), cfg,
                                 return_report=True)
        assert gate == "forced-m-gt-2"
        assert np.isfinite(h1.h.values).all()

    def test_explicit_euler_consistency_order(self, barenblatt_m2):
        _, prob = barenblatt_m2
        h0 = HState.zero(prob)
        F0 = evaluate_F(prob, h0).values
        diffs = []
        for dt in (1e-2, 5e-3, 2.5e-3):
            h1 = step_pme(prob, h0, PMERunConfig(dt=dt, T=dt,
                                                 fichera_each_step=False))
            diffs.append(np.abs(h1.h.values - (h0.h.values + dt * F0)).max())
        orders = [np.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
        assert min(orders) >= 1.9

    def test_fixed_point_correction_tightens(self, barenblatt_m2):
        sol, prob = barenblatt_m2
        dt = 5e-3
        base = step_pme(prob, HState.zero(prob),
                        PMERunConfig(dt=dt, T=dt, fixed_point_iters=0))
        corr = step_pme(prob, HState.zero(prob),
                        PMERunConfig(dt=dt, T=dt, fixed_point_iters=2))
        hex = sol.exact_height(prob.grid.points, 1.0 + dt)
        assert np.abs(corr.h.values - hex).max() \
            <= np.abs(base.h.values - hex).max() + 1e-12


class TestSolvePME:
    @pytest.mark.parametrize("m", [1.5, 2.0])
    def test_front_tracks_exact(self, m):
        sol, prob = make_barenblatt_problem(m, 201)
        cfg = PMERunConfig(dt=1e-3, T=0.5, front_stride=25)
        traj = solve_pme(prob, cfg)
        assert traj.diagnostics["gate"] == "certified"
        for t, pts in zip(traj.fronts.ts, traj.fronts.points):
            R = sol.R(1.0 + t)
            assert abs(np.max(np.abs(pts)) - R) / R <= 0.02

    def test_front_exponent_fit(self):
        sol, prob = make_barenblatt_problem(2.0, 201)
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.5, front_stride=25))
        ts = 1.0 + np.asarray(traj.fronts.ts)
        R = np.array([np.max(np.abs(p)) for p in traj.fronts.points])
        slope = np.polyfit(np.log(ts), np.log(R), 1)[0]
        assert abs(slope - 1.0 / 3.0) <= 0.05 / 3.0

    def test_cold_start_h_zero(self, barenblatt_m2):
        _, prob = barenblatt_m2
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=5e-3))
        assert traj.hstates[0].t == 0.0
        assert np.abs(traj.hstates[0].h.values).max() == 0.0

    def test_warm_start_agrees_with_cold(self, barenblatt_m2):
        _, prob = barenblatt_m2
        fs = formal_coefficients(prob, K=3)
        ht = build_htilde(fs, T=0.25)
        t_w, T_end = 0.02, 0.1
        cold = solve_pme(prob, PMERunConfig(dt=5e-4, T=T_end,
                                            front_stride=40))
        warm = solve_pme(prob, PMERunConfig(
            dt=5e-4, T=T_end - t_w, front_stride=40, start_mode="warm",
            warm_start=ht.values, t_warm=t_w))
        assert warm.hstates[-1].t == pytest.approx(T_end)
        gap = np.abs(warm.hstates[-1].h.values
                     - cold.hstates[-1].h.values).max()
        assert gap <= 5e-4

    def test_radial_2d_front_is_circle(self):
        sol = quadratic_pressure_radial(2.0, 2)
        R0 = float(sol.R(1.0))
        g = DiskGrid(Domain.disk((0.0, 0.0), R0), 33, 64)
        prob = sol.problem(g)
        traj = solve_pme(prob, PMERunConfig(dt=2e-3, T=0.2, front_stride=25))
        for t, pts in zip(traj.fronts.ts, traj.fronts.points):
            r = np.linalg.norm(pts, axis=1)
            assert (r.max() - r.min()) / r.mean() <= 0.01
            R = sol.R(1.0 + t)
            assert abs(r.mean() - R) / R <= 0.02

    def test_radial_reduction_matches_exact(self):
        sol = quadratic_pressure_radial(2.0, 3)
        g = RadialGrid(Domain.radial(3, float(sol.R(1.0))), 201)
        prob = sol.problem(g)
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.3, front_stride=50))
        for t, pts in zip(traj.fronts.ts, traj.fronts.points):
            R = sol.R(1.0 + t)
            assert abs(float(pts[0]) - R) / R <= 0.01

    def test_nondegeneracy_monitored(self, barenblatt_m2):
        _, prob = barenblatt_m2
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.1, front_stride=20))
        assert traj.diagnostics["nondegeneracy_ok"]
        assert traj.diagnostics["max_step_displacement"] > 0.0

    def test_per_step_reports_certified_regime(self):
        sol, prob = make_barenblatt_problem(1.5, 101)
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.05, front_stride=10))
        for rep in traj.reports:
            assert rep.verdicts["A1"] and rep.verdicts["A2"]
            assert rep.verdicts["B'"]


class TestFrontSpeed:
    def test_speed_matches_grad_v(self):
        sol, prob = make_barenblatt_problem(2.0, 201)
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.5, front_stride=25))
        disc = front_speed_check(prob, traj)
        speeds = [np.max(np.abs(s)) for s in traj.fronts.speeds]
        rel = [d / s for d, s in zip(disc[1:-1], speeds[1:-1])]
        assert max(rel) <= 0.03

    def test_exact_speed_value(self):
        sol, prob = make_barenblatt_problem(2.0, 201)
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=0.4, front_stride=20))
        j = len(traj.fronts.ts) // 2
        t = traj.fronts.ts[j]
        np.testing.assert_allclose(traj.fronts.speeds[j],
                                   sol.R_dot(1.0 + t), rtol=0.02)

    def test_refinement_shrinks_discrepancy(self):
        sol, _ = make_barenblatt_problem(2.0, 101)
        outs = []
        for nx, dt in ((101, 2e-3), (201, 1e-3)):
            _, prob = make_barenblatt_problem(2.0, nx)
            traj = solve_pme(prob, PMERunConfig(dt=dt, T=0.4,
                                                front_stride=int(0.05 / dt)))
            disc = front_speed_check(prob, traj)
            outs.append(max(disc[1:-1]))
        assert outs[1] < outs[0]

    def test_needs_three_samples(self, barenblatt_m2):
        from pmefront.errors import ConfigInvalid
        _, prob = barenblatt_m2
        traj = solve_pme(prob, PMERunConfig(dt=1e-3, T=1e-3, front_stride=1))
        with pytest.raises(ConfigInvalid):
            front_speed_check(prob, traj)
