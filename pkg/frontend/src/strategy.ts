import { SchemaError, Table, distinct, numericColumn, requireColumns } from "./csv.js";
import { grayShade } from "./scales.js";
import { document, rect, text } from "./svg.js";

/** Response-function panels: one grid per outcome, darker = more probable. */
export function renderStrategy(table: Table): string {
  requireColumns(table, ["lambda_a", "lambda_b"], "strategy");
  const probColumns = table.columns.filter((c) => /^p_\d+$/.test(c));
  if (probColumns.length === 0) {
    throw new SchemaError('strategy input has no outcome columns (expected "p_0", "p_1", ...)');
  }
  if (table.rows.length === 0) throw new SchemaError("strategy input has no data rows");

  const la = numericColumn(table, "lambda_a");
  const lb = numericColumn(table, "lambda_b");
  const aGrid = distinct(la);
  const bGrid = distinct(lb);

  const panel = 150;
  const gap = 34;
  const margin = 50;
  const width = margin * 2 + probColumns.length * panel + (probColumns.length - 1) * gap;
  const height = 280;
  const top = 56;
  const cellW = panel / aGrid.length;
  const cellH = panel / bGrid.length;

  const body: string[] = [];
  probColumns.forEach((column, p) => {
    const probs = numericColumn(table, column);
    const left = margin + p * (panel + gap);
    for (let i = 0; i < table.rows.length; i++) {
      const col = aGrid.indexOf(la[i]);
      const row = bGrid.indexOf(lb[i]);
      const x = left + col * cellW;
      const y = top + panel - (row + 1) * cellH;
      // p=1 solid dark, p=0 white
      body.push(rect(x, y, cellW, cellH, { fill: grayShade(1 - probs[i]) }));
    }
    body.push(rect(left, top, panel, panel, { fill: "none", stroke: "#222" }));
    body.push(text(left + panel / 2, top - 10, `outcome ${p}`,
      { "text-anchor": "middle", "font-size": 12 }));
    body.push(text(left + panel / 2, top + panel + 18, "lambda_a",
      { "text-anchor": "middle" }));
    if (p === 0) {
      body.push(text(margin - 24, top + panel / 2, "lambda_b", {
        "text-anchor": "middle",
        transform: `rotate(-90 ${margin - 24} ${top + panel / 2})`,
      }));
    }
  });
  body.push(text(width / 2, 22, "response function p(outcome | lambda_a, lambda_b)",
    { "text-anchor": "middle", "font-size": 13 }));
  return document(width, height, body);
}
