/**
 * Pure SVG-path geometry for the dashboard panels.  These functions map data
 * series to pixel-space path strings; all numbers come from the service, the
 * only work here is affine scaling for display.
 */

export interface ViewBox {
  width: number;
  height: number;
  padding: number;
}

export interface Scale {
  toPx(value: number): number;
}

export function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  const span = hi - lo || 1;
  return {
    toPx(value: number): number {
      return pxLo + ((value - lo) / span) * (pxHi - pxLo);
    },
  };
}

const fmt = (v: number): string => (Math.round(v * 100) / 100).toString();

/** Polyline path through (xs, ys) in data space. */
export function linePath(xs: number[], ys: number[], sx: Scale, sy: Scale): string {
  if (xs.length === 0) return "";
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    parts.push(`${i === 0 ? "M" : "L"}${fmt(sx.toPx(xs[i]))} ${fmt(sy.toPx(ys[i]))}`);
  }
  return parts.join(" ");
}

/** Closed band between mean - k*sd and mean + k*sd. */
export function bandPath(
  xs: number[],
  mean: number[],
  sd: number[],
  k: number,
  sx: Scale,
  sy: Scale,
): string {
  if (xs.length === 0) return "";
  const upper = linePath(xs, mean.map((m, i) => m + k * sd[i]), sx, sy);
  const lowerPts: string[] = [];
  for (let i = xs.length - 1; i >= 0; i--) {
    lowerPts.push(`L${fmt(sx.toPx(xs[i]))} ${fmt(sy.toPx(mean[i] - k * sd[i]))}`);
  }
  return `${upper} ${lowerPts.join(" ")} Z`;
}

/** Scale a series so its maximum is 1 (display-only normalisation). */
export function normalisedToMax(values: number[]): number[] {
  const top = Math.max(...values.map(Math.abs), 0);
  if (top === 0) return values.map(() => 0);
  return values.map((v) => v / top);
}

/** Data range padded by a fraction on both sides (degenerate-safe). */
export function paddedRange(values: number[], fraction = 0.08): [number, number] {
  if (values.length === 0) return [0, 1];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = (hi - lo) * fraction;
  return [lo - pad, hi + pad];
}
