import type { Column, Row } from "./csv.js";

export interface Series {
  x: number[];
  y: number[];
}

// common x-grid resolution for aligning seeds before averaging
export const GRID_POINTS = 256;

export function toSeries(rows: Row[], xCol: Column, yCol: Column): Series {
  const order = rows.map((_, i) => i).sort((a, b) => rows[a][xCol] - rows[b][xCol]);
  return {
    x: order.map((i) => rows[i][xCol]),
    y: order.map((i) => rows[i][yCol]),
  };
}

/** Trailing moving average over the last `window` rows; window 1 is identity. */
export function movingAverage(s: Series, window: number): Series {
  if (window <= 1) return s;
  const y: number[] = [];
  let acc = 0;
  for (let i = 0; i < s.y.length; i++) {
    acc += s.y[i];
    if (i >= window) acc -= s.y[i - window];
    y.push(acc / Math.min(i + 1, window));
  }
  return { x: [...s.x], y };
}

/** 256 evenly spaced points spanning the union of the series' x-ranges. */
export function makeGrid(seriesList: Series[]): number[] {
  const lo = Math.min(...seriesList.map((s) => s.x[0]));
  const hi = Math.max(...seriesList.map((s) => s.x[s.x.length - 1]));
  const grid: number[] = [];
  for (let i = 0; i < GRID_POINTS; i++) {
    grid.push(lo + ((hi - lo) * i) / (GRID_POINTS - 1));
  }
  return grid;
}

/**
 * Linear interpolation of `s` at each grid point. Points outside the
 * series' own x-range give null; seeds never extrapolate each other.
 */
export function interpolate(s: Series, grid: number[]): Array<number | null> {
  const out: Array<number | null> = [];
  let j = 0;
  const last = s.x.length - 1;
  for (const g of grid) {
    if (g < s.x[0] || g > s.x[last]) {
      out.push(null);
      continue;
    }
    while (j < last - 1 && s.x[j + 1] < g) j++;
    const x0 = s.x[j];
    const x1 = s.x[Math.min(j + 1, last)];
    if (x1 === x0) {
      out.push(s.y[Math.min(j + 1, last)]);
      continue;
    }
    const t = (g - x0) / (x1 - x0);
    out.push(s.y[j] + t * (s.y[Math.min(j + 1, last)] - s.y[j]));
  }
  return out;
}

export interface BandStats {
  mean: Array<number | null>;
  std: Array<number | null>;
  count: number[];
}

/**
 * Per-grid-point mean and population std across seeds. The mean exists
 * wherever at least one seed covers the point; the std (the band) only
 * where two or more overlap.
 */
export function bandStats(columns: Array<Array<number | null>>): BandStats {
  const n = columns[0].length;
  const mean: Array<number | null> = [];
  const std: Array<number | null> = [];
  const count: number[] = [];
  for (let i = 0; i < n; i++) {
    const values = columns.map((c) => c[i]).filter((v): v is number => v !== null);
    count.push(values.length);
    if (values.length === 0) {
      mean.push(null);
      std.push(null);
      continue;
    }
    const m = values.reduce((a, b) => a + b, 0) / values.length;
    mean.push(m);
    if (values.length < 2) {
      std.push(null);
      continue;
    }
    const varSum = values.reduce((a, b) => a + (b - m) * (b - m), 0);
    std.push(Math.sqrt(varSum / values.length));
  }
  return { mean, std, count };
}
