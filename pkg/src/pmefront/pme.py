"""Free-boundary evolution: semi-implicit linearized stepping of h_t = F(h, x).

Each step solves the linearized operator implicitly,

    (I - theta dt L(h_n)) delta = F(h_n, .),      h_{n+1} = h_n + dt delta,

which is consistent with explicit Euler to O(dt^2) while inheriting the
stiff stability of the implicit linear solve.  An optional defect-correction
loop (at most 3 iterations, frozen Jacobian) tightens delta toward the
nonlinear theta-method.

Every step is gated on the structure-condition report of the linearized
coefficients: runs with m > 2 refuse without force because the drift
condition (B) carries the wrong sign there; certified runs (m <= 2, or any
m in one dimension under B'') must pass A1 + A2 + B / B''.  Fronts are
reconstructed from the height function, and per-step diagnostics track the
condition report, the nondegeneracy floor, and a CFL-like bound on front
displacement.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import build_charts
from .errors import ConfigInvalid, PreconditionRefused
from .fichera import check_conditions
from .fields import ScalarField
from .linsolve import build_operator, energy_I_k, solve_implicit
from .transform import (HState, assemble_A, evaluate_F, linearize_F,
                        reconstruct_front)


@dataclass
class PMERunConfig:
    dt: float
    T: float
    theta: float = 1.0
    order: int = 2
    start_mode: str = "cold"          # "cold" (h = 0) or "warm" (from htilde)
    warm_start: object = None         # callable t -> node values
    t_warm: float = 0.0
    force: bool = False
    fichera_each_step: bool = True
    energy_each_step: bool = False
    front_stride: int = 1
    fixed_point_iters: int = 0
    c_min_factor: float = 0.5         # nondegeneracy monitor threshold

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ConfigInvalid("dt and T must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigInvalid("theta must lie in [0.5, 1]")
        if self.start_mode not in ("cold", "warm"):
            raise ConfigInvalid("start_mode must be 'cold' or 'warm'")
        if self.start_mode == "warm" and self.warm_start is None:
            raise ConfigInvalid("warm start needs the formal-solution field")
        if not 0 <= self.fixed_point_iters <= 3:
            raise ConfigInvalid("fixed_point_iters must be in 0..3")


@dataclass
class FrontTrajectory:
    ts: list = field(default_factory=list)
    points: list = field(default_factory=list)      # (B,) or (B, 2) per time
    grad_v: list = field(default_factory=list)      # |grad v| per front point
    speeds: list = field(default_factory=list)      # normal speeds, filled in
    max_step_displacement: float = 0.0              # CFL-like bound, logged

    def finalize_speeds(self):
        """Central-difference normal front speeds from recorded positions."""
        self.speeds = []
        ts = np.asarray(self.ts)
        for j in range(len(ts)):
            jm, jp = max(j - 1, 0), min(j + 1, len(ts) - 1)
            vel = (np.asarray(self.points[jp]) - np.asarray(self.points[jm])) \
                / (ts[jp] - ts[jm])
            self.speeds.append(_normal_speed(self.points[j], vel))


def _normal_speed(points, velocity):
    pts = np.asarray(points)
    if pts.ndim == 1:
        # 1D: outward is the sign of the position relative to the midpoint
        sign = np.sign(pts - pts.mean())
        sign[sign == 0] = 1.0
        return velocity * sign
    # closed front polygon: outward normal from the tangent (CCW ordering)
    nxt = np.roll(pts, -1, axis=0)
    prv = np.roll(pts, 1, axis=0)
    tang = nxt - prv
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    # orient outward (away from the centroid)
    out = pts - pts.mean(axis=0)
    flip = np.sign(np.einsum("xi,xi->x", normal, out))
    flip[flip == 0] = 1.0
    normal *= flip[:, None]
    return np.einsum("xi,xi->x", velocity, normal)


def _boundary_mesh(grid):
    return grid.dr if hasattr(grid, "dr") else grid.h


def _gate(problem, coeffs, cfg, t):
    """Structure-condition gate; PreconditionRefused carries the reason.

    The gate certifies discrete sign conditions, so its zero-tolerance
    cannot sit below the stencils' own truncation error: it is floored at
    (boundary mesh)^order times the coefficient scale.  The exactly
    borderline case (q3 = 0 at m = 2) then classifies stably.
    """
    report = check_conditions(coeffs, problem.domain, t, p=cfg.order) \
        if cfg.fichera_each_step or problem.m <= 2 or problem.dim == 1 \
        else None
    if report is not None:
        dx = _boundary_mesh(problem.grid)
        tol_zero = max(1e-6, dx ** cfg.order) * report.scale
        report = report.reclassified(tol_zero, report.tol_strict)
    if problem.m > 2:
        if not cfg.force:
            raise PreconditionRefused(
                f"m = {problem.m} > 2: the Fichera drift condition (B) fails "
                "at the boundary (q3 > 0); pass force to step outside the "
                "certified regime")
        return report, "forced-m-gt-2"
    if report is not None and not report.passes_gate(problem.dim) \
            and not cfg.force:
        raise PreconditionRefused(
            "per-step structure-condition gate failed "
            f"(classification {report.classification!r})")
    return report, "certified"


def step_pme(problem, hstate, cfg, return_report=False):
    """One semi-implicit linearized step of size cfg.dt."""
    st = assemble_A(problem, hstate, cfg.order)
    coeffs = linearize_F(problem, hstate, cfg.order, state=st)
    report, gate_kind = _gate(problem, coeffs, cfg, hstate.t)
    Fv = evaluate_F(problem, hstate, cfg.order, state=st).values
    snap = coeffs.at(hstate.t)
    L = build_operator(problem.grid, snap, cfg.order)
    M = (sp.identity(problem.grid.n_nodes, format="csr")
         - cfg.theta * cfg.dt * L).tocsr()
    delta = solve_implicit(problem.grid, M, Fv)
    # optional defect correction toward the nonlinear theta-method
    # delta = theta F(h + dt delta) + (1-theta) F(h), frozen Jacobian M
    for _ in range(cfg.fixed_point_iters):
        trial = hstate.with_values(hstate.h.values + cfg.dt * delta,
                                   hstate.t + cfg.dt)
        F_trial = evaluate_F(problem, trial, cfg.order).values
        defect = delta - cfg.theta * F_trial - (1.0 - cfg.theta) * Fv
        delta = delta - solve_implicit(problem.grid, M, defect)
    out = hstate.with_values(hstate.h.values + cfg.dt * delta,
                             hstate.t + cfg.dt)
    if return_report:
        return out, report, gate_kind
    return out


@dataclass
class PMETrajectory:
    ts: list
    hstates: list                     # strided HState snapshots
    fronts: FrontTrajectory
    reports: list                     # per-step Fichera reports (or None)
    energies: list                    # per-step I_1(h) when enabled
    diagnostics: dict


def solve_pme(problem, cfg):
    """March the height function, reconstruct fronts, run diagnostics."""
    if cfg.start_mode == "cold":
        h = HState.zero(problem)
        t0 = 0.0
    else:
        t0 = cfg.t_warm
        h = HState(ScalarField(problem.grid, cfg.warm_start(t0), t=t0),
                   t0, problem.tube_radius)
    charts = partition = None
    if cfg.energy_each_step:
        charts, partition = build_charts(problem.domain)

    n_steps = int(round(cfg.T / cfg.dt))
    fronts = FrontTrajectory()
    reports, energies, hstates, ts = [], [], [(h)], [h.t]
    nondeg_floor = []

    def record(hs):
        fr = reconstruct_front(problem, hs, cfg.order)
        if fronts.points:
            diff = np.asarray(fr.front_points) - np.asarray(fronts.points[-1])
            if diff.ndim == 1:
                disp = float(np.max(np.abs(diff)))
            else:
                disp = float(np.max(np.linalg.norm(diff, axis=1)))
            fronts.max_step_displacement = max(
                fronts.max_step_displacement, disp)
        fronts.ts.append(hs.t)
        fronts.points.append(fr.front_points)
        fronts.grad_v.append(fr.grad_v_front)
        # nondegeneracy monitor: pressure + |grad v|^2 on the deformed graph
        st = assemble_A(problem, hs, cfg.order)
        gv2 = np.einsum("xj,xj->x", st.grad_v, st.grad_v)
        nondeg_floor.append(float(np.min(fr.pressure + gv2)))

    record(h)
    for step in range(1, n_steps + 1):
        h, rep, gate_kind = step_pme(problem, h, cfg, return_report=True)
        reports.append(rep)
        if cfg.energy_each_step:
            energies.append(energy_I_k(h.h, problem.domain, charts,
                                       partition, 1, p=cfg.order))
        if step % cfg.front_stride == 0 or step == n_steps:
            record(h)
            hstates.append(h)
            ts.append(h.t)
    fronts.finalize_speeds()
    diagnostics = {
        "gate": gate_kind,
        "nondegeneracy_floor": nondeg_floor,
        "nondegeneracy_ok": bool(min(nondeg_floor)
                                 >= cfg.c_min_factor * problem.c_floor),
        "max_step_displacement": fronts.max_step_displacement,
        "attained_T": h.t,
    }
    return PMETrajectory(ts, hstates, fronts, reports, energies, diagnostics)


def front_speed_check(problem, trajectory):
    """max |central-difference front speed - |grad v|| per recorded time.

    The first and last samples use one-sided differences and are reported
    but best judged at interior times.
    """
    fronts = trajectory.fronts
    if len(fronts.ts) < 3:
        raise ConfigInvalid("front speed check needs >= 3 output times")
    if not fronts.speeds:
        fronts.finalize_speeds()
    discrepancies = []
    for j in range(len(fronts.ts)):
        d = np.max(np.abs(fronts.speeds[j] - fronts.grad_v[j]))
        discrepancies.append(float(d))
    return discrepancies
