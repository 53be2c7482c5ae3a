export {
  RESULT_COLUMNS,
  SchemaError,
  groupBy,
  parseResultsCsv,
  parseResultsText,
} from "./schema.js";
export type { ResultColumn, ResultRow } from "./schema.js";
export { estimate, fitLogLogSlope } from "./stats.js";
export type { Estimate } from "./stats.js";
export { PALETTE, renderChart } from "./svg.js";
export type { ChartOptions, Series, SeriesPoint } from "./svg.js";
export { PlotError, plotScaling, scalingSpec, validateSpec } from "./scaling.js";
export type { PlotSpec, ScalingSlice } from "./scaling.js";
export { overlaySpec, plotBoundOverlay } from "./overlay.js";
export type { OverlayReport } from "./overlay.js";
export { main } from "./cli.js";
