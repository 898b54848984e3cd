"""Command-line entry point: check-fichera, solve-linear, solve-pme, taylor, mms.

Runs are driven by a structured YAML/JSON config validated against a strict
schema (unknown keys rejected) with dot-path overrides (--set a.b=v).  Every
run writes into its artifact directory:

    resolved-config     the fully resolved config actually used
    manifest.json       config hash, code version, wall time, diagnostics,
                        exit classification (written even on failure)

plus subcommand artifacts: fichera.json, energy.csv (t, I0, I1, I2),
front.csv (t, idx, x[, y], speed, grad_v), field snapshots (CSV + JSON
header), taylor coefficient dumps, MMS bundles.  Identical config and code
version produce bit-identical CSV output.

Exit codes: 0 success, 1 invalid config, 2 precondition refusal (e.g. the
structure-condition gate), 3 numerical failure.
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .domain import Domain, build_charts
from .errors import ConfigInvalid, PmefrontError
from .expressions import compile_expression
from .fichera import LinearCoefficients, check_conditions
from .fields import make_grid, write_field, ScalarField
from .linsolve import LinearRunConfig, solve_linear
from .oracle import (ExactPMESolution, exp_flat_profile, mms_linear,
                     power_profile, sine_bump_profile, sine_profile)
from .pme import PMERunConfig, front_speed_check, solve_pme
from .taylor import build_htilde, formal_coefficients, residual_jet, \
    time_shift_rho
from .transform import HState, PMEProblem, linearize_F

# --------------------------------------------------------------------------
# config schema
# --------------------------------------------------------------------------

_NUM = {"type": "number"}
_POSINT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "domain"],
            "properties": {
                "type": {"enum": ["pme", "linear"]},
                "m": {"type": "number", "exclusiveMinimum": 1},
                "t0": _NUM,
                "domain": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["interval", "disk", "radial",
                                          "star"]},
                        "a": _NUM, "b": _NUM,
                        "center": {"type": "array", "items": _NUM},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "n": _POSINT,
                        "csv": {"type": "string"},
                        "collar_width": {"type": "number",
                                         "exclusiveMinimum": 0},
                    },
                },
                "v0": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "expression": {"type": "string"},
                        "builtin": {"enum": ["barenblatt"]},
                        "A0": {"type": "number", "exclusiveMinimum": 0},
                        "samples": {"type": "string"},
                    },
                },
                "coefficients": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "builtin": {"enum": ["degenerate-bump"]},
                        "expressions": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {k: {"type": "string"}
                                           for k in ("a", "b", "f", "g")},
                        },
                    },
                },
            },
        },
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nx": _POSINT, "nr": _POSINT, "ntheta": _POSINT,
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "theta": {"type": "number", "minimum": 0.5, "maximum": 1.0},
                "order": {"enum": [2, 4]},
            },
        },
        "regularization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "minimum": 0},
                "N": {"enum": [1, 2]},
            },
        },
        "taylor": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": _POSINT,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "eps_shift": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "mms": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "profile": {"enum": ["exp-flat", "power"]},
                "power": _POSINT,
                "spatial": {"enum": ["sine-bump", "sine"]},
                "k_max": {"type": "integer", "minimum": 0},
                "times": {"type": "array", "items": _NUM},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "stride": _POSINT,
                "formats": {"type": "array", "items": {"enum": ["csv"]}},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol_zero": _NUM, "tol_strict": _NUM},
        },
        "force": {"type": "boolean"},
    },
}

_DEFAULTS = {
    "discretization": {"nx": 201, "nr": 33, "ntheta": 64, "dt": 1e-3,
                       "T": 0.1, "theta": 1.0, "order": 2},
    "regularization": {"epsilon": 0.0, "N": 1},
    "taylor": {"K": 3, "T": 0.25, "eps_shift": 0.02},
    "mms": {"profile": "exp-flat", "power": 3, "spatial": "sine-bump",
            "k_max": 2, "times": [0.1, 0.25, 0.5]},
    "output": {"dir": "artifacts", "stride": 50, "formats": ["csv"]},
    "tolerances": {},
    "force": False,
}


def load_config(path):
    text = Path(path).read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid(f"config {path} is not a mapping")
    return cfg


def apply_overrides(cfg, sets):
    for item in sets or []:
        if "=" not in item:
            raise ConfigInvalid(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        value = yaml.safe_load(raw)
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigInvalid(f"--set path {key!r} crosses a scalar")
        node[parts[-1]] = value
    return cfg


def validate_config(cfg):
    import jsonschema

    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"config key {path}: {exc.message}") from exc
    merged = {}
    for key, defaults in _DEFAULTS.items():
        if isinstance(defaults, dict):
            merged[key] = {**defaults, **cfg.get(key, {})}
        else:
            merged[key] = cfg.get(key, defaults)
    merged["problem"] = cfg["problem"]
    return merged


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def _exact_solution(cfg):
    p = cfg["problem"]
    v0 = p.get("v0", {})
    n = {"interval": 1, "radial": p["domain"].get("n", 2),
         "disk": 2}.get(p["domain"]["kind"], 2)
    return ExactPMESolution(p["m"], n, v0.get("A0", 1.0), p.get("t0", 1.0))


def build_domain(cfg, sol=None):
    d = cfg["problem"]["domain"]
    kind = d["kind"]
    cw = d.get("collar_width")
    if sol is not None:
        R0 = float(sol.R(sol.t0))
        if kind == "interval":
            return Domain.interval(-R0, R0, cw)
        if kind == "radial":
            return Domain.radial(d.get("n", sol.n), R0, cw)
        if kind == "disk":
            return Domain.disk(d.get("center", (0.0, 0.0)), R0, cw)
        raise ConfigInvalid("barenblatt data needs interval/radial/disk")
    if kind == "interval":
        return Domain.interval(d["a"], d["b"], cw)
    if kind == "disk":
        return Domain.disk(d.get("center", (0.0, 0.0)), d["radius"], cw)
    if kind == "radial":
        return Domain.radial(d["n"], d["radius"], cw)
    return Domain.star_from_csv(d["csv"], cw)


def build_problem(cfg):
    p = cfg["problem"]
    if p["type"] != "pme":
        raise ConfigInvalid("this subcommand needs problem.type = pme")
    if "m" not in p:
        raise ConfigInvalid("pme problems need the exponent m")
    disc = cfg["discretization"]
    v0cfg = p.get("v0", {})
    if v0cfg.get("builtin") == "barenblatt":
        sol = _exact_solution(cfg)
        domain = build_domain(cfg, sol)
        grid = make_grid(domain, nx=disc["nx"], nr=disc.get("nr"),
                         ntheta=disc.get("ntheta"))
        return sol.problem(grid), sol
    domain = build_domain(cfg)
    grid = make_grid(domain, nx=disc["nx"], nr=disc.get("nr"),
                     ntheta=disc.get("ntheta"))
    if "expression" in v0cfg:
        expr = compile_expression(v0cfg["expression"], {"m": p["m"]})
        vals = _eval_on_grid(expr, grid, t=0.0)
    elif "samples" in v0cfg:
        data = np.loadtxt(v0cfg["samples"], delimiter=",", skiprows=1,
                          ndmin=2)
        vals = data[:, -1]
    else:
        raise ConfigInvalid("problem.v0 needs expression | builtin | samples")
    return PMEProblem(p["m"], ScalarField(grid, vals, t=0.0),
                      p_v0=disc["order"]), None


def _eval_on_grid(expr, grid, t):
    pts = grid.points
    if pts.ndim == 1:
        out = expr(x=pts, y=np.zeros_like(pts), t=t)
    else:
        out = expr(x=pts[:, 0], y=pts[:, 1], t=t)
    return np.broadcast_to(np.asarray(out, dtype=float),
                           (grid.n_nodes,)).copy()


def build_linear_coeffs(cfg, grid):
    p = cfg["problem"]
    ccfg = p.get("coefficients", {})
    if grid.dim != 1:
        raise ConfigInvalid("expression coefficients are 1D; use pme "
                            "problems for 2D runs")
    x = grid.points
    N = grid.n_nodes
    if ccfg.get("builtin") == "degenerate-bump":
        a, b = grid.domain.params["a"], grid.domain.params["b"]
        avals = ((x - a) * (b - x))[:, None, None]
        return LinearCoefficients(grid, avals, np.zeros((N, 1)), np.zeros(N))
    exprs = ccfg.get("expressions")
    if not exprs or "a" not in exprs:
        raise ConfigInvalid("linear problems need coefficients.builtin or "
                            "coefficients.expressions with at least 'a'")
    consts = {"m": p["m"]} if "m" in p else None
    compiled = {k: compile_expression(v, consts)
                for k, v in exprs.items()}

    def a_fn(t):
        return _eval_on_grid(compiled["a"], grid, t)[:, None, None]

    def b_fn(t):
        if "b" not in compiled:
            return np.zeros((N, 1))
        return _eval_on_grid(compiled["b"], grid, t)[:, None]

    def f_fn(t):
        if "f" not in compiled:
            return np.zeros(N)
        return _eval_on_grid(compiled["f"], grid, t)

    g_fn = None
    if "g" in compiled:
        def g_fn(t):
            return _eval_on_grid(compiled["g"], grid, t)

    return LinearCoefficients(grid, a_fn, b_fn, f_fn, g_fn)


# --------------------------------------------------------------------------
# artifact writers
# --------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def write_front_csv(path, fronts):
    two_d = np.asarray(fronts.points[0]).ndim > 1
    header = ["t", "idx", "x"] + (["y"] if two_d else []) \
        + ["speed", "grad_v"]
    rows = []
    for j, t in enumerate(fronts.ts):
        pts = np.atleast_1d(fronts.points[j])
        sp = np.atleast_1d(fronts.speeds[j])
        gv = np.atleast_1d(fronts.grad_v[j])
        for i in range(len(sp)):
            if two_d:
                rows.append((float(t), i, float(pts[i, 0]), float(pts[i, 1]),
                             float(sp[i]), float(gv[i])))
            else:
                rows.append((float(t), i, float(pts[i]), float(sp[i]),
                             float(gv[i])))
    _write_csv(path, header, rows)


def write_energy_csv(path, trace):
    _write_csv(path, ["t", "I0", "I1", "I2"],
               zip(map(float, trace.ts), map(float, trace.I0),
                   map(float, trace.I1), map(float, trace.I2)))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _json_dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


# --------------------------------------------------------------------------
# subcommand handlers (return a diagnostics dict for the manifest)
# --------------------------------------------------------------------------

def cmd_check_fichera(cfg, outdir):
    p = cfg["problem"]
    tol = cfg["tolerances"]
    if p["type"] == "pme":
        problem, _ = build_problem(cfg)
        coeffs = linearize_F(problem, HState.zero(problem),
                             cfg["discretization"]["order"])
        domain = problem.domain
        t = 0.0
    else:
        domain = build_domain(cfg)
        grid = make_grid(domain, nx=cfg["discretization"]["nx"])
        coeffs = build_linear_coeffs(cfg, grid)
        t = 0.0
    report = check_conditions(coeffs, domain, t,
                              tol_zero=tol.get("tol_zero"),
                              tol_strict=tol.get("tol_strict"),
                              p=cfg["discretization"]["order"])
    _json_dump(outdir / "fichera.json", report.to_dict())
    v = report.verdicts
    flags = " ".join(f"{name}={v[name]}" for name in
                     ("A1", "A2", "B", "B'", "B''"))
    print(f"fichera: {report.classification} ({flags})")
    return {"classification": report.classification,
            "verdicts": {k: bool(v) for k, v in report.verdicts.items()}}


def cmd_solve_linear(cfg, outdir):
    p = cfg["problem"]
    if p["type"] != "linear":
        raise ConfigInvalid("solve-linear needs problem.type = linear")
    disc = cfg["discretization"]
    reg = cfg["regularization"]
    domain = build_domain(cfg)
    grid = make_grid(domain, nx=disc["nx"])
    coeffs = build_linear_coeffs(cfg, grid)
    if coeffs._g is None:
        coeffs = coeffs.replace_g(lambda t: np.zeros(grid.n_nodes))
    run_cfg = LinearRunConfig(dt=disc["dt"], T=disc["T"],
                              theta=disc["theta"], order=disc["order"],
                              epsilon=reg["epsilon"], N_reg=reg["N"],
                              force=cfg["force"],
                              store_stride=cfg["output"]["stride"])
    run = solve_linear(coeffs, run_cfg)
    for j, (t, w) in enumerate(run.snapshots):
        write_field(ScalarField(grid, w, t=t), outdir / f"w_{j:06d}")
    write_energy_csv(outdir / "energy.csv", run.energy)
    meta = {"fichera": run.report.to_dict(),
            "gronwall_C": run.gronwall_C,
            "theta": disc["theta"], "dt": disc["dt"], "T": disc["T"],
            "epsilon": reg["epsilon"], "N": reg["N"]}
    _json_dump(outdir / "metadata.json", meta)
    return {"gronwall_C": run.gronwall_C,
            "final_sup": float(np.max(np.abs(run.w_final))),
            "classification": run.report.classification}


def cmd_solve_pme(cfg, outdir):
    disc = cfg["discretization"]
    problem, sol = build_problem(cfg)
    run_cfg = PMERunConfig(dt=disc["dt"], T=disc["T"], theta=disc["theta"],
                           order=disc["order"], force=cfg["force"],
                           front_stride=cfg["output"]["stride"])
    traj = solve_pme(problem, run_cfg)
    write_front_csv(outdir / "front.csv", traj.fronts)
    for j, hs in enumerate(traj.hstates):
        write_field(hs.h, outdir / f"h_{j:06d}")
    report0 = traj.reports[0]
    if report0 is not None:
        _json_dump(outdir / "fichera.json", report0.to_dict())
    speed_disc = (front_speed_check(problem, traj)
                  if len(traj.fronts.ts) >= 3 else None)
    diag = {
        "m": problem.m,
        "t0": cfg["problem"].get("t0", 1.0),
        "gate": traj.diagnostics["gate"],
        "nondegeneracy_ok": traj.diagnostics["nondegeneracy_ok"],
        "max_step_displacement": traj.diagnostics["max_step_displacement"],
        "attained_T": traj.diagnostics["attained_T"],
        "front_speed_discrepancy": speed_disc,
        "exact_front_exponent": (sol.front_exponent if sol else None),
    }
    _json_dump(outdir / "diagnostics.json", diag)
    return diag


def cmd_taylor(cfg, outdir):
    problem, _ = build_problem(cfg)
    tcfg = cfg["taylor"]
    fs = formal_coefficients(problem, tcfg["K"],
                             cfg["discretization"]["order"])
    for j, a in enumerate(fs.a):
        write_field(a, outdir / f"a_{j}")
    ht = build_htilde(fs, tcfg["T"])
    norms, scale = residual_jet(problem, ht, j_max=tcfg["K"] - 1,
                                p=cfg["discretization"]["order"])
    rho = time_shift_rho(problem, ht, tcfg["eps_shift"],
                         p=cfg["discretization"]["order"])
    out = {"K": tcfg["K"], "T": tcfg["T"],
           "residual_jets": {str(k): v for k, v in norms.items()},
           "scale": scale,
           "rho_continuity_jump": rho.continuity_jump,
           "rho_derivative_jump": rho.derivative_jump}
    _json_dump(outdir / "taylor.json", out)
    return out


def cmd_mms(cfg, outdir):
    p = cfg["problem"]
    if p["type"] != "linear":
        raise ConfigInvalid("mms needs problem.type = linear")
    disc = cfg["discretization"]
    mcfg = cfg["mms"]
    domain = build_domain(cfg)
    grid = make_grid(domain, nx=disc["nx"])
    coeffs = build_linear_coeffs(cfg, grid)
    profile = (exp_flat_profile() if mcfg["profile"] == "exp-flat"
               else power_profile(mcfg["power"]))
    a0, b0 = domain.params["a"], domain.params["b"]
    spatial = (sine_bump_profile(a0, b0) if mcfg["spatial"] == "sine-bump"
               else sine_profile(a0, b0))
    mms = mms_linear(grid, coeffs, profile, spatial, k_max=mcfg["k_max"])
    snap = coeffs.at(0.0)
    _write_csv(outdir / "coefficients.csv",
               ["idx", "x", "a", "b", "f"],
               ((i, float(grid.points[i]), float(snap.a[i, 0, 0]),
                 float(snap.b[i, 0]), float(snap.f[i]))
                for i in range(grid.n_nodes)))
    for j, t in enumerate(mcfg["times"]):
        write_field(ScalarField(grid, mms.g(t), t=t), outdir / f"g_{j:03d}")
        write_field(ScalarField(grid, mms.w_exact(t), t=t),
                    outdir / f"w_exact_{j:03d}")
    meta = {"profile": profile.label, "spatial": spatial.label,
            "k_max": mcfg["k_max"], "times": list(map(float, mcfg["times"]))}
    _json_dump(outdir / "mms.json", meta)
    return meta


_HANDLERS = {
    "check-fichera": cmd_check_fichera,
    "solve-linear": cmd_solve_linear,
    "solve-pme": cmd_solve_pme,
    "taylor": cmd_taylor,
    "mms": cmd_mms,
}


# --------------------------------------------------------------------------
# orchestration
# --------------------------------------------------------------------------

def _config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def run(subcommand, config_path, overrides=None, outdir=None, force=False):
    """Execute one subcommand; returns the exit code, writes artifacts."""
    t_wall = time.monotonic()
    manifest = {"subcommand": subcommand, "code_version": __version__,
                "exit_classification": "ok"}
    out = None
    try:
        raw = load_config(config_path)
        raw = apply_overrides(raw, overrides)
        if force:
            raw["force"] = True
        cfg = validate_config(raw)
        out = Path(outdir) if outdir else Path(cfg["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        manifest["config_hash"] = _config_hash(cfg)
        with open(out / "resolved-config", "w") as fh:
            yaml.safe_dump(cfg, fh, sort_keys=True)
        handler = _HANDLERS[subcommand]
        manifest["diagnostics"] = handler(cfg, out)
        code = 0
    except PmefrontError as exc:
        manifest["exit_classification"] = exc.classification
        manifest["error"] = str(exc)
        code = exc.exit_code
        print(f"error [{exc.classification}]: {exc}", file=sys.stderr)
    manifest["wall_time_s"] = time.monotonic() - t_wall
    if out is not None:
        _json_dump(out / "manifest.json", manifest)
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pmefront",
        description="Porous-medium free-boundary simulator and structure-"
                    "condition certifier")
    parser.add_argument("subcommand", choices=sorted(_HANDLERS))
    parser.add_argument("--config", required=True, help="YAML/JSON config")
    parser.add_argument("--set", action="append", dest="sets", default=[],
                        metavar="KEY=VALUE", help="dot-path config override")
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--force", action="store_true",
                        help="run past structure-condition refusals")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.sets, args.out, args.force)


if __name__ == "__main__":
    sys.exit(main())
