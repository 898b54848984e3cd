/** Minimal SVG chart builder.
 *
 * Figures are presentation only (all quantitative conclusions live in the
 * JSON sidecars), so a small hand-rolled builder beats a DOM-bound charting
 * dependency here: axes, polylines, point markers, horizontal bands, text.
 */

export interface Series {
  x: number[];
  y: number[];
  color?: string;
  label?: string;
  markers?: boolean;
}

export interface Band {
  yLow: number;
  yHigh: number;
  color?: string;
  label?: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  bands?: Band[];
  logX?: boolean;
  logY?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { left: 62, right: 16, top: 34, bottom: 44 };
const PALETTE = ["#1f6fb2", "#c4501e", "#2d8a4d", "#7b4fa6", "#a8322d"];

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const first = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += s) out.push(v);
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

export function renderChart(spec: ChartSpec): string {
  const W = spec.width ?? 640;
  const H = spec.height ?? 420;
  const tx = (v: number) => (spec.logX ? Math.log10(v) : v);
  const ty = (v: number) => (spec.logY ? Math.log10(v) : v);

  const xs = spec.series.flatMap((s) => s.x.map(tx));
  const ys = spec.series.flatMap((s) => s.y.map(ty));
  for (const b of spec.bands ?? []) {
    ys.push(ty(b.yLow), ty(b.yHigh));
  }
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (xHi === xLo) {
    xLo -= 0.5;
    xHi += 0.5;
  }
  const padY = yHi === yLo ? Math.max(Math.abs(yHi), 1) * 0.1 : (yHi - yLo) * 0.08;
  yLo -= padY;
  yHi += padY;

  const px = (v: number) =>
    MARGIN.left + ((tx(v) - xLo) / (xHi - xLo)) * (W - MARGIN.left - MARGIN.right);
  const py = (v: number) =>
    H - MARGIN.bottom - ((ty(v) - yLo) / (yHi - yLo)) * (H - MARGIN.top - MARGIN.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<text x="${W / 2}" y="20" text-anchor="middle" font-size="14">${spec.title}</text>`,
  );

  for (const band of spec.bands ?? []) {
    const y1 = py(band.yHigh);
    const y2 = py(band.yLow);
    parts.push(
      `<rect x="${MARGIN.left}" y="${y1}" width="${W - MARGIN.left - MARGIN.right}" height="${Math.max(y2 - y1, 1)}" fill="${band.color ?? "#f3d9a4"}" opacity="0.55"/>`,
    );
  }

  // axes + ticks (drawn in transformed space, labeled in data space)
  const xTicks = ticks(xLo, xHi);
  const yTicks = ticks(yLo, yHi);
  const back = (v: number, log: boolean | undefined) => (log ? Math.pow(10, v) : v);
  for (const t of xTicks) {
    const x = MARGIN.left + ((t - xLo) / (xHi - xLo)) * (W - MARGIN.left - MARGIN.right);
    parts.push(
      `<line x1="${x}" y1="${H - MARGIN.bottom}" x2="${x}" y2="${MARGIN.top}" stroke="#e5e5e5"/>`,
      `<text x="${x}" y="${H - MARGIN.bottom + 16}" text-anchor="middle" font-size="11">${fmt(back(t, spec.logX))}</text>`,
    );
  }
  for (const t of yTicks) {
    const y = H - MARGIN.bottom - ((t - yLo) / (yHi - yLo)) * (H - MARGIN.top - MARGIN.bottom);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${W - MARGIN.right}" y2="${y}" stroke="#e5e5e5"/>`,
      `<text x="${MARGIN.left - 6}" y="${y + 4}" text-anchor="end" font-size="11">${fmt(back(t, spec.logY))}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" height="${H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#444"/>`,
    `<text x="${W / 2}" y="${H - 10}" text-anchor="middle" font-size="12">${spec.xLabel}</text>`,
    `<text x="16" y="${H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${H / 2})">${spec.yLabel}</text>`,
  );

  spec.series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const pts = s.x.map((xv, k) => `${px(xv).toFixed(2)},${py(s.y[k]).toFixed(2)}`);
    parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="1.6"/>`,
    );
    if (s.markers) {
      for (const p of pts) {
        const [cx, cy] = p.split(",");
        parts.push(`<circle cx="${cx}" cy="${cy}" r="2.6" fill="${color}"/>`);
      }
    }
    if (s.label) {
      parts.push(
        `<text x="${W - MARGIN.right - 8}" y="${MARGIN.top + 16 + 15 * i}" text-anchor="end" font-size="11" fill="${color}">${s.label}</text>`,
      );
    }
  });

  parts.push("</svg>");
  return parts.join("\n");
}
