#!/usr/bin/env node
import * as fs from "node:fs";
import * as path from "node:path";
import { globSync } from "glob";
import yargs from "yargs";

import { readMetricsCsv, SchemaError, SCHEMA, type Column } from "./csv.js";
import { renderChart, type GroupCurve } from "./chart.js";
import { bandStats, interpolate, makeGrid, movingAverage, toSeries } from "./series.js";

export class UsageError extends Error {}

const X_AXES = ["wall_time_s", "actor_steps", "learner_steps"] as const;

interface PlotArgs {
  group: string[];
  x: Column;
  y: Column;
  out: string;
  window: number;
}

export function runPlot(args: PlotArgs): void {
  if (!(SCHEMA as readonly string[]).includes(args.y)) {
    throw new UsageError(`--y must be one of the metrics columns, got ${args.y}`);
  }
  if (!Number.isInteger(args.window) || args.window < 1) {
    throw new UsageError(`--window must be a positive integer, got ${args.window}`);
  }

  const curves: GroupCurve[] = [];
  args.group.forEach((spec, colorIndex) => {
    const eq = spec.indexOf("=");
    if (eq <= 0) throw new UsageError(`--group expects LABEL=GLOB, got ${spec}`);
    const label = spec.slice(0, eq);
    const pattern = spec.slice(eq + 1);
    const paths = globSync(pattern).sort();
    if (paths.length === 0) {
      throw new UsageError(`group ${label}: no files match ${pattern}`);
    }
    const seeds = [];
    for (const p of paths) {
      const rows = readMetricsCsv(p);
      if (rows === null) continue;
      seeds.push(movingAverage(toSeries(rows, args.x, args.y), args.window));
    }
    if (seeds.length === 0) {
      throw new Error(`group ${label}: every matched CSV was empty`);
    }
    const grid = makeGrid(seeds);
    curves.push({
      label,
      colorIndex,
      grid,
      stats: bandStats(seeds.map((s) => interpolate(s, grid))),
    });
  });

  const svg = renderChart(curves, args.x, args.y);
  fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
  fs.writeFileSync(args.out, svg);
}

const parser = yargs()
  .scriptName("curve-plots")
  .usage("$0 plot --group LABEL=GLOB [--group ...] --x AXIS --out FILE")
  .command("plot", "render mean/std learning curves from metrics CSVs", (y) =>
    y
      .option("group", {
        type: "string",
        array: true,
        demandOption: true,
        describe: "LABEL=GLOB naming one curve and its per-seed CSVs; repeatable",
      })
      .option("x", {
        choices: X_AXES,
        demandOption: true,
        describe: "x axis column",
      })
      .option("y", {
        type: "string",
        default: "eval_return_mean",
        describe: "y axis column",
      })
      .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
      .option("window", {
        type: "number",
        default: 1,
        describe: "trailing moving-average window, in rows",
      }),
  )
  .demandCommand(1, "expected a command: plot")
  .strict()
  .exitProcess(false)
  .fail((msg, err) => {
    throw new UsageError(msg ?? (err ? err.message : "bad arguments"));
  });

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parser.parseSync(argv);
    if (parsed._[0] !== "plot") {
      throw new UsageError(`unknown command ${parsed._[0]}`);
    }
    runPlot({
      group: parsed.group as string[],
      x: parsed.x as Column,
      y: parsed.y as Column,
      out: parsed.out as string,
      window: parsed.window as number,
    });
  } catch (e) {
    if (e instanceof UsageError) {
      console.error(`error: ${e.message}`);
      return 2;
    }
    console.error(`error: ${(e as Error).message}`);
    return 3;
  }
  console.log(`wrote ${parsed.out}`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
