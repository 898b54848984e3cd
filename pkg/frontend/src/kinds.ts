/** The five figure kinds. Each returns the SVG text plus a JSON sidecar;
 * every quantitative number in a sidecar is recomputed from the CSV/JSON
 * artifacts themselves (never copied out of the run manifest). */

import { existsSync, readdirSync, statSync } from "fs";
import { join } from "path";

import { ArtifactDir, frontByTime } from "./artifacts.js";
import { MissingArtifact } from "./errors.js";
import { gronwallRate, interp1, logLogSlope, supNorm } from "./fit.js";
import { renderChart } from "./svg.js";

export interface PlotResult {
  svg: string;
  sidecar: Record<string, unknown>;
}

export type PlotKind =
  | "front"
  | "exponent-fit"
  | "convergence"
  | "fichera-profile"
  | "energy";

function frontRadii(art: ArtifactDir): { ts: number[]; R: number[]; twoD: boolean } {
  const grouped = frontByTime(art.front());
  if (grouped.size < 2) {
    throw new MissingArtifact(
      "front.csv holds a single output time; no trajectory to plot",
    );
  }
  const ts: number[] = [];
  const R: number[] = [];
  let twoD = false;
  for (const [t, rows] of grouped) {
    ts.push(t);
    twoD = rows.some((r) => r.y !== undefined && Number.isFinite(r.y));
    if (twoD) {
      const radii = rows.map((r) => Math.hypot(r.x, r.y ?? 0));
      R.push(radii.reduce((a, b) => a + b, 0) / radii.length);
    } else {
      R.push(supNorm(rows.map((r) => r.x)));
    }
  }
  return { ts, R, twoD };
}

export function plotFront(art: ArtifactDir): PlotResult {
  const grouped = frontByTime(art.front());
  if (grouped.size < 2) {
    throw new MissingArtifact(
      "front.csv holds a single output time; no trajectory to plot",
    );
  }
  const byIdx = new Map<number, { t: number[]; x: number[] }>();
  for (const [t, rows] of grouped) {
    for (const row of rows) {
      const series = byIdx.get(row.idx) ?? { t: [], x: [] };
      series.t.push(t);
      series.x.push(row.x);
      byIdx.set(row.idx, series);
    }
  }
  const { ts, R } = frontRadii(art);
  const svg = renderChart({
    title: "Front trajectory",
    xLabel: "t",
    yLabel: "front position",
    series: [...byIdx.entries()].map(([idx, s]) => ({
      x: s.t,
      y: s.x,
      label: byIdx.size <= 6 ? `idx ${idx}` : undefined,
    })),
  });
  return {
    svg,
    sidecar: {
      kind: "front",
      n_times: ts.length,
      t_range: [ts[0], ts[ts.length - 1]],
      outer_radius_initial: R[0],
      outer_radius_final: R[R.length - 1],
    },
  };
}

export function plotExponentFit(art: ArtifactDir): PlotResult {
  const { ts, R, twoD } = frontRadii(art);
  const cfg = art.resolvedConfig();
  const m = cfg.m;
  const t0 = cfg.t0 ?? 1.0;
  if (m === undefined) {
    throw new MissingArtifact("resolved-config carries no exponent m");
  }
  const shifted = ts.map((t) => t0 + t);
  const slope = logLogSlope(shifted, R);
  const n = twoD ? 2 : 1;
  const exact = 1.0 / (n * (m - 1.0) + 2.0);
  const svg = renderChart({
    title: `Front radius vs time (log-log), fitted slope ${slope.toFixed(4)}`,
    xLabel: "t0 + t",
    yLabel: "front radius",
    logX: true,
    logY: true,
    series: [
      { x: shifted, y: R, markers: true, label: "measured" },
      {
        x: [shifted[0], shifted[shifted.length - 1]],
        y: [
          R[0],
          R[0] * Math.pow(shifted[shifted.length - 1] / shifted[0], exact),
        ],
        label: `slope ${exact.toFixed(4)} (exact)`,
      },
    ],
  });
  return {
    svg,
    sidecar: {
      kind: "exponent-fit",
      fitted_slope: slope,
      exact_exponent: exact,
      relative_deviation: Math.abs(slope - exact) / exact,
      n_times: ts.length,
      m,
      t0,
    },
  };
}

export function plotConvergence(parentDir: string): PlotResult {
  if (!existsSync(parentDir)) {
    throw new MissingArtifact(`${parentDir} does not exist`);
  }
  const runs = readdirSync(parentDir)
    .map((name) => join(parentDir, name))
    .filter((p) => statSync(p).isDirectory())
    .filter((p) => existsSync(join(p, "manifest.json")))
    .map((p) => new ArtifactDir(p));
  if (runs.length < 3) {
    throw new MissingArtifact(
      `${parentDir}: need >= 3 run subdirectories for a convergence study`,
    );
  }
  const entries = runs
    .map((art) => {
      const snap = art.finalSnapshot("w_");
      return { nx: snap.x.length, ...snap };
    })
    .sort((a, b) => a.nx - b.nx);
  const finest = entries[entries.length - 1];
  const hs: number[] = [];
  const errs: number[] = [];
  for (const run of entries.slice(0, -1)) {
    const ref = interp1(finest.x, finest.value, run.x);
    const diff = run.value.map((v, i) => v - ref[i]);
    hs.push(1.0 / (run.nx - 1));
    errs.push(supNorm(diff));
  }
  const order = logLogSlope(hs, errs);
  const svg = renderChart({
    title: `Self-convergence vs finest run, fitted order ${order.toFixed(2)}`,
    xLabel: "h",
    yLabel: "sup error vs finest",
    logX: true,
    logY: true,
    series: [{ x: hs, y: errs, markers: true }],
  });
  return {
    svg,
    sidecar: {
      kind: "convergence",
      nx: entries.map((e) => e.nx),
      h: hs,
      sup_errors: errs,
      fitted_order: order,
    },
  };
}

export function plotFicheraProfile(art: ArtifactDir): PlotResult {
  const rep = art.fichera();
  const idx = rep.boundary_idx.map((_, i) => i);
  const maxAbsQ3 = supNorm(rep.q3);
  const withinBand = maxAbsQ3 <= rep.tol_zero;
  const svg = renderChart({
    title: "Boundary drift profile q3 = (b - div a) . nu",
    xLabel: "boundary node",
    yLabel: "q values",
    bands: [
      { yLow: -rep.tol_zero, yHigh: rep.tol_zero, label: "zero band" },
    ],
    series: [
      { x: idx, y: rep.q3, markers: true, label: "q3" },
      { x: idx, y: rep.q2, markers: true, label: "q2" },
      { x: idx, y: rep.q4, markers: true, label: "q4" },
    ],
  });
  return {
    svg,
    sidecar: {
      kind: "fichera-profile",
      max_abs_q3: maxAbsQ3,
      max_q2: Math.max(...rep.q2),
      max_q4: Math.max(...rep.q4),
      tol_zero: rep.tol_zero,
      tol_strict: rep.tol_strict,
      q3_within_zero_band: withinBand,
    },
  };
}

export function plotEnergy(art: ArtifactDir): PlotResult {
  const rows = art.energy();
  if (rows.length < 2) {
    throw new MissingArtifact("energy.csv holds fewer than two samples");
  }
  const ts = rows.map((r) => r.t);
  const svg = renderChart({
    title: "Weighted energies",
    xLabel: "t",
    yLabel: "I_k",
    series: [
      { x: ts, y: rows.map((r) => r.I0), label: "I0" },
      { x: ts, y: rows.map((r) => r.I1), label: "I1" },
      { x: ts, y: rows.map((r) => r.I2), label: "I2" },
    ],
  });
  return {
    svg,
    sidecar: {
      kind: "energy",
      final: {
        I0: rows[rows.length - 1].I0,
        I1: rows[rows.length - 1].I1,
        I2: rows[rows.length - 1].I2,
      },
      gronwall_C_recomputed: gronwallRate(ts, rows.map((r) => r.I1)),
      n_samples: rows.length,
    },
  };
}

export function producePlot(kind: PlotKind, artifactsDir: string): PlotResult {
  if (kind === "convergence") {
    return plotConvergence(artifactsDir);
  }
  const art = new ArtifactDir(artifactsDir);
  switch (kind) {
    case "front":
      return plotFront(art);
    case "exponent-fit":
      return plotExponentFit(art);
    case "fichera-profile":
      return plotFicheraProfile(art);
    case "energy":
      return plotEnergy(art);
    default:
      throw new MissingArtifact(`unknown plot kind ${kind}`);
  }
}
