export { SchemaError, parseCsv, requireColumns, numericColumn, distinct } from "./csv.js";
export type { Table } from "./csv.js";
export { renderCurve } from "./curve.js";
export { renderHeatmap } from "./heatmap.js";
export { renderCalibration } from "./calibration.js";
export { renderStrategy } from "./strategy.js";
export { grayShade, logNorm } from "./scales.js";
export { main } from "./cli.js";
