import { describe, expect, it } from "vitest";

import { renderChart, type GroupCurve } from "../src/chart.js";

function curve(label: string, colorIndex: number, seeds: number[][]): GroupCurve {
  const grid = seeds[0].map((_, i) => i);
  const mean = [];
  const std = [];
  const count = [];
  for (let i = 0; i < grid.length; i++) {
    const vals = seeds.map((s) => s[i]);
    const m = vals.reduce((a, b) => a + b, 0) / vals.length;
    mean.push(m);
    count.push(vals.length);
    std.push(
      vals.length >= 2
        ? Math.sqrt(vals.reduce((a, b) => a + (b - m) ** 2, 0) / vals.length)
        : null,
    );
  }
  return { label, colorIndex, grid, stats: { mean, std, count } };
}

describe("renderChart", () => {
  it("draws a mean line and band per multi-seed group plus a legend", () => {
    const svg = renderChart(
      [
        curve("full", 0, [[0, 1, 2], [2, 3, 4], [1, 2, 3]]),
        curve("flat", 1, [[5, 4, 3], [3, 2, 1]]),
      ],
      "actor_steps",
      "eval_return_mean",
    );
    expect(svg).toContain("<svg");
    expect(svg).toContain("</svg>");
    expect(svg.match(/class="mean"/g)).toHaveLength(2);
    expect(svg.match(/class="band"/g)).toHaveLength(2);
    expect(svg).toContain(">full</text>");
    expect(svg).toContain(">flat</text>");
    expect(svg).toContain("actor_steps");
    expect(svg).toContain("eval_return_mean");
  });

  it("is deterministic for fixed inputs", () => {
    const make = () =>
      renderChart([curve("a", 0, [[1, 2], [3, 4]])], "wall_time_s", "eval_return_mean");
    expect(make()).toBe(make());
  });

  it("a single seed renders the line with no band", () => {
    const svg = renderChart(
      [curve("solo", 0, [[1, 2, 3]])],
      "learner_steps",
      "eval_return_mean",
    );
    expect(svg.match(/class="mean"/g)).toHaveLength(1);
    expect(svg).not.toContain('class="band"');
  });

  it("breaks the mean line across uncovered gaps", () => {
    const stats = {
      mean: [1, null, 3, 4],
      std: [null, null, null, null],
      count: [1, 0, 1, 1],
    };
    const svg = renderChart(
      [{ label: "gap", colorIndex: 0, grid: [0, 1, 2, 3], stats }],
      "actor_steps",
      "eval_return_mean",
    );
    expect(svg.match(/class="mean"/g)).toHaveLength(2);
  });

  it("escapes markup in labels", () => {
    const svg = renderChart(
      [curve("a<b", 0, [[1, 2]])],
      "actor_steps",
      "eval_return_mean",
    );
    expect(svg).toContain("a&lt;b");
  });
});
