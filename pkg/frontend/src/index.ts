export { readMetricsCsv, SchemaError, SCHEMA } from "./csv.js";
export type { Column, Row } from "./csv.js";
export {
  bandStats,
  interpolate,
  makeGrid,
  movingAverage,
  toSeries,
  GRID_POINTS,
} from "./series.js";
export type { BandStats, Series } from "./series.js";
export { renderChart } from "./chart.js";
export type { GroupCurve } from "./chart.js";
export { main, runPlot, UsageError } from "./cli.js";
