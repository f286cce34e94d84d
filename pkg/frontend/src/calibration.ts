import { SchemaError, Table, distinct, numericColumn, requireColumns } from "./csv.js";
import { Frame, logScale, xAxis, yAxis } from "./scales.js";
import { document, line, polyline, text } from "./svg.js";

const NEEDED = ["n_outcomes", "n_samples", "mean_kl", "mean_euclid"];

interface Panel {
  metric: "mean_euclid" | "mean_kl";
  title: string;
  /** Predicted sampling error for the dotted guide line. */
  law: (nOutcomes: number, nSamples: number) => number;
}

const PANELS: Panel[] = [
  { metric: "mean_euclid", title: "Euclidean error", law: (_o, n) => 1 / Math.sqrt(n) },
  { metric: "mean_kl", title: "KL error", law: (o, n) => o / (2 * n) },
];

/** Sampling-error panels: measured points per outcome count plus law guides. */
export function renderCalibration(table: Table): string {
  requireColumns(table, NEEDED, "calibration");
  if (table.rows.length === 0) throw new SchemaError("calibration input has no data rows");

  const outcomes = numericColumn(table, "n_outcomes");
  const samples = numericColumn(table, "n_samples");
  const outcomeGrid = distinct(outcomes);

  const width = 760;
  const height = 380;
  const body: string[] = [];

  PANELS.forEach((panel, p) => {
    const values = numericColumn(table, panel.metric);
    const frame: Frame = { left: 70 + p * 370, top: 50, width: 290, height: height - 140 };
    const xs = logScale([Math.min(...samples), Math.max(...samples)],
      [frame.left, frame.left + frame.width]);
    const positive = values.filter((v) => v > 0);
    if (positive.length === 0) {
      throw new SchemaError(`column "${panel.metric}" has no positive values to plot`);
    }
    const guideMin = panel.law(outcomeGrid[0], Math.max(...samples));
    const ys = logScale(
      [Math.min(...positive, guideMin), Math.max(...positive)],
      [frame.top + frame.height, frame.top]);

    body.push(...xAxis(xs, frame, "samples"));
    body.push(...yAxis(ys, frame, panel.metric));

    outcomeGrid.forEach((nOut, s) => {
      const idx = outcomes.flatMap((o, i) => (o === nOut ? [i] : []))
        .sort((a, b) => samples[a] - samples[b]);
      const shade = Math.round(20 + (150 * s) / Math.max(1, outcomeGrid.length - 1));
      const stroke = `rgb(${shade},${shade},${shade})`;
      body.push(polyline(
        idx.map((i) => [xs(samples[i]), ys(Math.max(values[i], 1e-300))] as [number, number]),
        { stroke, "stroke-width": 1.6 },
      ));
      body.push(polyline(
        idx.map((i) => [xs(samples[i]), ys(panel.law(nOut, samples[i]))] as [number, number]),
        { stroke, "stroke-width": 1, "stroke-dasharray": "2 3", class: "guide" },
      ));
      if (p === 0) {
        const lx = frame.left + 8;
        const ly = frame.top + 10 + s * 15;
        body.push(line(lx, ly, lx + 20, ly, { stroke, "stroke-width": 1.6 }));
        body.push(text(lx + 25, ly + 3, `${nOut} outcomes`));
      }
    });
    body.push(text(frame.left + frame.width / 2, 30, panel.title,
      { "text-anchor": "middle", "font-size": 13 }));
  });

  body.push(text(width / 2, height - 14,
    "dotted: predicted laws 1/sqrt(N) and N_o/(2N)",
    { "text-anchor": "middle", fill: "#555" }));
  return document(width, height, body);
}
