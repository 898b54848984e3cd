/** Small numeric helpers: least squares, interpolation, norms. */

export function leastSquaresSlope(xs: number[], ys: number[]): {
  slope: number;
  intercept: number;
} {
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxy = 0;
  let sxx = 0;
  for (let i = 0; i < n; i++) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return { slope: sxy / sxx, intercept: my - (sxy / sxx) * mx };
}

export function logLogSlope(xs: number[], ys: number[]): number {
  return leastSquaresSlope(xs.map(Math.log), ys.map(Math.log)).slope;
}

/** Linear interpolation of (xs, ys) sorted by xs onto query points. */
export function interp1(xs: number[], ys: number[], q: number[]): number[] {
  return q.map((xq) => {
    if (xq <= xs[0]) return ys[0];
    if (xq >= xs[xs.length - 1]) return ys[ys.length - 1];
    let lo = 0;
    let hi = xs.length - 1;
    while (hi - lo > 1) {
      const mid = (lo + hi) >> 1;
      if (xs[mid] <= xq) lo = mid;
      else hi = mid;
    }
    const w = (xq - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] * (1 - w) + ys[hi] * w;
  });
}

export function supNorm(values: number[]): number {
  return values.reduce((a, b) => Math.max(a, Math.abs(b)), 0);
}

/** Smallest C >= 0 making exp(-C t)(I1 + 1) nonincreasing on the trace. */
export function gronwallRate(ts: number[], I1: number[]): number {
  let rate = 0;
  for (let i = 1; i < ts.length; i++) {
    const slope =
      (Math.log(I1[i] + 1) - Math.log(I1[i - 1] + 1)) / (ts[i] - ts[i - 1]);
    rate = Math.max(rate, slope);
  }
  return rate;
}
