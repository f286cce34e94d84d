import { SchemaError, Table, distinct, numericColumn, requireColumns } from "./csv.js";
import { Frame, grayShade, logNorm } from "./scales.js";
import { document, rect, text } from "./svg.js";

/** 2D scan heatmap over (theta, mu); darker cells mean smaller final KL. */
export function renderHeatmap(table: Table): string {
  requireColumns(table, ["theta", "mu", "final_kl"], "heatmap");
  if (table.rows.length === 0) throw new SchemaError("heatmap input has no data rows");

  const thetas = numericColumn(table, "theta");
  const mus = numericColumn(table, "mu");
  const kls = numericColumn(table, "final_kl");
  const thetaGrid = distinct(thetas);
  const muGrid = distinct(mus);

  const positive = kls.filter((v) => v > 0);
  const min = positive.length > 0 ? Math.min(...positive) : 1;
  const max = Math.max(...kls, min * 1.0001);

  const width = 560;
  const height = 440;
  const frame: Frame = { left: 70, top: 40, width: width - 150, height: height - 100 };
  const cellW = frame.width / thetaGrid.length;
  const cellH = frame.height / muGrid.length;

  const body: string[] = [];
  for (let i = 0; i < table.rows.length; i++) {
    const col = thetaGrid.indexOf(thetas[i]);
    const row = muGrid.indexOf(mus[i]);
    const x = frame.left + col * cellW;
    const y = frame.top + frame.height - (row + 1) * cellH; // mu grows upward
    body.push(rect(x, y, cellW, cellH, { fill: grayShade(logNorm(kls[i], min, max)) }));
  }

  body.push(rect(frame.left, frame.top, frame.width, frame.height, {
    fill: "none", stroke: "#222", "stroke-width": 1,
  }));
  for (const [idx, t] of [0, thetaGrid.length - 1].entries()) {
    body.push(text(frame.left + (t + 0.5) * cellW, frame.top + frame.height + 16,
      thetaGrid[t].toPrecision(3), { "text-anchor": idx === 0 ? "start" : "end" }));
  }
  for (const [idx, m] of [0, muGrid.length - 1].entries()) {
    body.push(text(frame.left - 7, frame.top + frame.height - (m + 0.5) * cellH + 3,
      muGrid[m].toPrecision(3), { "text-anchor": "end", "font-size": idx === 0 ? 11 : 11 }));
  }
  body.push(text(frame.left + frame.width / 2, frame.top + frame.height + 34, "theta",
    { "text-anchor": "middle", "font-size": 12 }));
  body.push(text(16, frame.top + frame.height / 2, "mu", {
    "text-anchor": "middle", "font-size": 12,
    transform: `rotate(-90 16 ${frame.top + frame.height / 2})`,
  }));

  body.push(...colorBar(frame, min, max));
  body.push(text(width / 2, 20, "final KL divergence (darker = smaller)",
    { "text-anchor": "middle", "font-size": 13 }));
  return document(width, height, body);
}

function colorBar(frame: Frame, min: number, max: number): string[] {
  const x = frame.left + frame.width + 24;
  const steps = 24;
  const stepH = frame.height / steps;
  const out: string[] = [];
  for (let k = 0; k < steps; k++) {
    // top of the bar shows the largest (lightest) value
    const t = 1 - k / (steps - 1);
    out.push(rect(x, frame.top + k * stepH, 16, stepH + 0.5, { fill: grayShade(t) }));
  }
  out.push(rect(x, frame.top, 16, frame.height, { fill: "none", stroke: "#222" }));
  out.push(text(x + 20, frame.top + 8, max.toExponential(1)));
  out.push(text(x + 20, frame.top + frame.height, min.toExponential(1)));
  return out;
}
