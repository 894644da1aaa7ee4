import { describe, expect, it } from "vitest";

import {
  bandStats,
  GRID_POINTS,
  interpolate,
  makeGrid,
  movingAverage,
  toSeries,
} from "../src/series.js";
import type { Row } from "../src/csv.js";

// deterministic small PRNG so the oracle comparison is reproducible
function mulberry32(seed: number) {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function oracleInterp(x: number[], y: number[], g: number): number | null {
  if (g < x[0] || g > x[x.length - 1]) return null;
  for (let i = 0; i < x.length - 1; i++) {
    if (g >= x[i] && g <= x[i + 1]) {
      if (x[i + 1] === x[i]) return y[i + 1];
      return y[i] + ((y[i + 1] - y[i]) * (g - x[i])) / (x[i + 1] - x[i]);
    }
  }
  return y[y.length - 1];
}

describe("toSeries", () => {
  it("sorts rows by the x column", () => {
    const rows = [
      { wall_time_s: 2, eval_return_mean: 20 },
      { wall_time_s: 1, eval_return_mean: 10 },
      { wall_time_s: 3, eval_return_mean: 30 },
    ] as Row[];
    const s = toSeries(rows, "wall_time_s", "eval_return_mean");
    expect(s.x).toEqual([1, 2, 3]);
    expect(s.y).toEqual([10, 20, 30]);
  });
});

describe("movingAverage", () => {
  it("window 1 is the identity", () => {
    const s = { x: [0, 1, 2], y: [5, 7, 9] };
    expect(movingAverage(s, 1)).toBe(s);
  });

  it("trailing mean over the window, shorter at the start", () => {
    const s = { x: [0, 1, 2], y: [1, 3, 5] };
    expect(movingAverage(s, 2).y).toEqual([1, 2, 4]);
  });
});

describe("makeGrid", () => {
  it("spans the union of ranges with 256 points", () => {
    const grid = makeGrid([
      { x: [0, 10], y: [0, 0] },
      { x: [5, 30], y: [0, 0] },
    ]);
    expect(grid).toHaveLength(GRID_POINTS);
    expect(grid[0]).toBe(0);
    expect(grid[grid.length - 1]).toBe(30);
  });
});

describe("interpolate", () => {
  it("reproduces sample points exactly and averages midpoints", () => {
    const s = { x: [0, 2, 4], y: [1, 5, 3] };
    const got = interpolate(s, [0, 1, 2, 3, 4]);
    expect(got).toEqual([1, 3, 5, 4, 3]);
  });

  it("gives null outside the series' own range", () => {
    const s = { x: [2, 4], y: [1, 1] };
    expect(interpolate(s, [0, 2, 4, 6])).toEqual([null, 1, 1, null]);
  });
});

describe("bandStats", () => {
  it("band collapses with a single seed", () => {
    const stats = bandStats([[1, 2, 3]]);
    expect(stats.mean).toEqual([1, 2, 3]);
    expect(stats.std).toEqual([null, null, null]);
    expect(stats.count).toEqual([1, 1, 1]);
  });

  it("identical seeds give a zero-width band", () => {
    const stats = bandStats([
      [4, 5],
      [4, 5],
    ]);
    expect(stats.std).toEqual([0, 0]);
  });

  it("bands appear only where two or more seeds overlap", () => {
    const a = { x: [0, 10], y: [0, 10] };
    const b = { x: [5, 15], y: [5, 15] };
    const grid = makeGrid([a, b]);
    const stats = bandStats([interpolate(a, grid), interpolate(b, grid)]);
    for (let i = 0; i < grid.length; i++) {
      const overlap = grid[i] >= 5 && grid[i] <= 10;
      expect(stats.count[i]).toBe(overlap ? 2 : 1);
      expect(stats.std[i] === null).toBe(!overlap);
      expect(stats.mean[i]).not.toBeNull();
    }
  });

  it("matches a direct recomputation within 1e-9 on random seeds", () => {
    const rand = mulberry32(12345);
    for (let trial = 0; trial < 20; trial++) {
      const seeds = [];
      const n = 2 + Math.floor(rand() * 3);
      for (let k = 0; k < n; k++) {
        const start = rand() * 10;
        const len = 3 + Math.floor(rand() * 20);
        const x = [start];
        const y = [rand() * 100];
        for (let i = 1; i < len; i++) {
          x.push(x[i - 1] + 0.1 + rand() * 5);
          y.push(rand() * 100);
        }
        seeds.push({ x, y });
      }
      const grid = makeGrid(seeds);
      const stats = bandStats(seeds.map((s) => interpolate(s, grid)));
      for (let i = 0; i < grid.length; i++) {
        const vals = seeds
          .map((s) => oracleInterp(s.x, s.y, grid[i]))
          .filter((v): v is number => v !== null);
        expect(stats.count[i]).toBe(vals.length);
        if (vals.length === 0) continue;
        const mean = vals.reduce((p, q) => p + q, 0) / vals.length;
        expect(Math.abs((stats.mean[i] as number) - mean)).toBeLessThan(1e-9);
        if (vals.length >= 2) {
          const sq = vals.reduce((p, q) => p + (q - mean) ** 2, 0) / vals.length;
          expect(Math.abs((stats.std[i] as number) - Math.sqrt(sq))).toBeLessThan(1e-9);
        }
      }
    }
  });
});
