import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { readMetricsCsv, type Column } from "../src/csv.js";
import { bandStats, interpolate, makeGrid, toSeries } from "../src/series.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

let tmp: string;
beforeEach(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "curves-cli-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "warn").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});
afterEach(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
  vi.restoreAllMocks();
});

function plotArgs(x: string, out: string, extra: string[] = []): string[] {
  return [
    "plot",
    "--group",
    `full=${FIXTURES}/categorical_s*.csv`,
    "--group",
    `flat=${FIXTURES}/scalar_s*.csv`,
    "--x",
    x,
    "--out",
    out,
    ...extra,
  ];
}

describe("plot command", () => {
  for (const axis of ["wall_time_s", "actor_steps"]) {
    it(`renders the two-group three-seed chart against ${axis}`, () => {
      const out = path.join(tmp, `${axis}.svg`);
      expect(main(plotArgs(axis, out))).toBe(0);
      const svg = fs.readFileSync(out, "utf8");
      expect(svg).toContain("<svg");
      expect(svg.match(/class="mean"/g)).toHaveLength(2);
      // three seeds per group overlap across each group's whole span
      expect(svg.match(/class="band"/g)).toHaveLength(2);
      expect(svg).toContain(">full</text>");
      expect(svg).toContain(">flat</text>");
    });
  }

  it("learner_steps is also a valid axis", () => {
    const out = path.join(tmp, "ls.svg");
    expect(main(plotArgs("learner_steps", out))).toBe(0);
    expect(fs.existsSync(out)).toBe(true);
  });

  it("chart bands agree with a recomputation from the raw CSVs", () => {
    // the rendered band edges are mean +/- std of the interpolated seeds;
    // recompute from the fixture files and check the drawn coordinates
    for (const axis of ["wall_time_s", "actor_steps"] as Column[]) {
      const seeds = [0, 1, 2].map((s) => {
        const rows = readMetricsCsv(path.join(FIXTURES, `categorical_s${s}.csv`));
        return toSeries(rows!, axis, "eval_return_mean");
      });
      const grid = makeGrid(seeds);
      const stats = bandStats(seeds.map((s) => interpolate(s, grid)));
      for (let i = 0; i < grid.length; i++) {
        expect(stats.count[i]).toBe(3);
        const direct = seeds.map((s) => {
          // every grid point sits inside all three seed ranges here
          let j = 0;
          while (j + 1 < s.x.length - 1 && s.x[j + 1] < grid[i]) j++;
          const t = (grid[i] - s.x[j]) / (s.x[j + 1] - s.x[j]);
          return s.y[j] + t * (s.y[j + 1] - s.y[j]);
        });
        const m = direct.reduce((a, b) => a + b, 0) / 3;
        const sd = Math.sqrt(direct.reduce((a, b) => a + (b - m) ** 2, 0) / 3);
        expect(Math.abs((stats.mean[i] as number) - m)).toBeLessThan(1e-9);
        expect(Math.abs((stats.std[i] as number) - sd)).toBeLessThan(1e-9);
      }
    }
  });

  it("applies the moving-average window", () => {
    const out = path.join(tmp, "smooth.svg");
    expect(main(plotArgs("actor_steps", out, ["--window", "3"]))).toBe(0);
    expect(fs.existsSync(out)).toBe(true);
  });

  it("skips empty CSVs with a warning and still renders the rest", () => {
    const dir = path.join(tmp, "mixed");
    fs.mkdirSync(dir);
    fs.copyFileSync(
      path.join(FIXTURES, "categorical_s0.csv"),
      path.join(dir, "a.csv"),
    );
    fs.copyFileSync(path.join(FIXTURES, "header_only.csv"), path.join(dir, "b.csv"));
    const out = path.join(tmp, "mixed.svg");
    const code = main([
      "plot",
      "--group",
      `g=${dir}/*.csv`,
      "--x",
      "actor_steps",
      "--out",
      out,
    ]);
    expect(code).toBe(0);
    expect(console.warn).toHaveBeenCalled();
    expect(fs.existsSync(out)).toBe(true);
  });
});

describe("failure modes", () => {
  it("missing --out is a usage error", () => {
    const code = main([
      "plot",
      "--group",
      `g=${FIXTURES}/categorical_s*.csv`,
      "--x",
      "actor_steps",
    ]);
    expect(code).toBe(2);
  });

  it("unknown command is a usage error", () => {
    expect(main(["render", "--out", "x.svg"])).toBe(2);
  });

  it("a group without LABEL= is a usage error", () => {
    const code = main([
      "plot",
      "--group",
      `${FIXTURES}/categorical_s*.csv`,
      "--x",
      "actor_steps",
      "--out",
      path.join(tmp, "x.svg"),
    ]);
    expect(code).toBe(2);
  });

  it("an axis outside the schema is a usage error", () => {
    const code = main(
      plotArgs("actor_steps", path.join(tmp, "x.svg"), ["--y", "reward"]),
    );
    expect(code).toBe(2);
  });

  it("a glob matching nothing is a usage error", () => {
    const code = main([
      "plot",
      "--group",
      `g=${tmp}/nothing-*.csv`,
      "--x",
      "actor_steps",
      "--out",
      path.join(tmp, "x.svg"),
    ]);
    expect(code).toBe(2);
  });

  it("a schema mismatch fails naming the column", () => {
    const bad = path.join(tmp, "bad.csv");
    const text = fs.readFileSync(path.join(FIXTURES, "categorical_s0.csv"), "utf8");
    fs.writeFileSync(bad, text.replace("critic_loss_mean", "loss"));
    const code = main([
      "plot",
      "--group",
      `g=${bad}`,
      "--x",
      "actor_steps",
      "--out",
      path.join(tmp, "x.svg"),
    ]);
    expect(code).toBe(3);
    const messages = (console.error as ReturnType<typeof vi.fn>).mock.calls.flat();
    expect(messages.some((m) => String(m).includes("critic_loss_mean"))).toBe(true);
  });

  it("a group made entirely of empty CSVs is a data error", () => {
    const dir = path.join(tmp, "empties");
    fs.mkdirSync(dir);
    fs.copyFileSync(path.join(FIXTURES, "header_only.csv"), path.join(dir, "a.csv"));
    const code = main([
      "plot",
      "--group",
      `g=${dir}/*.csv`,
      "--x",
      "actor_steps",
      "--out",
      path.join(tmp, "x.svg"),
    ]);
    expect(code).toBe(3);
  });
});
