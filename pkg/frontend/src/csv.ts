import * as fs from "node:fs";
import Papa from "papaparse";

// column order written by the training CLI; charts refuse anything else
export const SCHEMA = [
  "wall_time_s",
  "learner_steps",
  "actor_steps",
  "eval_return_mean",
  "eval_return_std",
  "critic_loss_mean",
  "actor_objective_mean",
  "snapshot_version",
] as const;

export type Column = (typeof SCHEMA)[number];
export type Row = Record<Column, number>;

export class SchemaError extends Error {}

/**
 * Read one metrics CSV. Returns null (after a warning on stderr) when the
 * file holds no data rows; throws SchemaError naming the first offending
 * column when the header deviates from the training CLI's schema.
 */
export function readMetricsCsv(path: string): Row[] | null {
  const text = fs.readFileSync(path, "utf8");
  if (text.trim() === "") {
    console.warn(`warning: ${path} is empty, skipping`);
    return null;
  }
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const want of SCHEMA) {
    if (!fields.includes(want)) {
      throw new SchemaError(`${path}: missing column ${want}`);
    }
  }
  for (const got of fields) {
    if (!(SCHEMA as readonly string[]).includes(got)) {
      throw new SchemaError(`${path}: unexpected column ${got}`);
    }
  }
  if (parsed.data.length === 0) {
    console.warn(`warning: ${path} has no data rows, skipping`);
    return null;
  }
  return parsed.data;
}
