import { SchemaError, Table, numericColumn, distinct, requireColumns } from "./csv.js";
import { Frame, linearScale, logScale, xAxis, yAxis } from "./scales.js";
import { document, line, polyline, text } from "./svg.js";

const RESULT_COLUMNS = ["final_kl", "final_euclid", "best_raw_loss"];

const SERIES_STYLE: Record<string, Record<string, string | number>> = {
  final_euclid: { stroke: "#111111", "stroke-width": 1.6 },
  final_kl: { stroke: "#777777", "stroke-width": 1.6 },
  best_raw_loss: { stroke: "#aaaaaa", "stroke-width": 1.2, "stroke-dasharray": "4 3" },
};

/** Distance-vs-parameter curves from a scan CSV (one line per result metric). */
export function renderCurve(table: Table): string {
  requireColumns(table, RESULT_COLUMNS, "curve");
  const x = sweptParameter(table);
  if (table.rows.length === 0) throw new SchemaError("curve input has no data rows");

  const xs = numericColumn(table, x.name);
  const series = RESULT_COLUMNS.map((name) => ({
    name,
    values: numericColumn(table, name),
  }));

  const width = 520;
  const height = 360;
  const frame: Frame = { left: 60, top: 40, width: width - 80, height: height - 100 };

  const allY = series.flatMap((s) => s.values);
  const useLog = allY.every((v) => v > 0);
  const yScale = useLog
    ? logScale([Math.min(...allY), Math.max(...allY)], [frame.top + frame.height, frame.top])
    : linearScale([Math.min(...allY), Math.max(...allY)], [frame.top + frame.height, frame.top]);
  const xScale = linearScale([Math.min(...xs), Math.max(...xs)], [frame.left, frame.left + frame.width]);

  const order = xs.map((_, i) => i).sort((a, b) => xs[a] - xs[b]);
  const body: string[] = [];
  body.push(...xAxis(xScale, frame, x.name));
  body.push(...yAxis(yScale, frame, "distance"));
  for (const s of series) {
    const pts = order.map((i) => [xScale(xs[i]), yScale(s.values[i])] as [number, number]);
    body.push(polyline(pts, SERIES_STYLE[s.name]));
  }

  // legend, top right
  let ly = frame.top + 4;
  for (const s of series) {
    const lx = frame.left + frame.width - 120;
    body.push(line(lx, ly, lx + 22, ly, SERIES_STYLE[s.name]));
    body.push(text(lx + 28, ly + 3, s.name));
    ly += 16;
  }
  body.push(
    text(width / 2, 20, `fitted distance vs ${x.name}`, {
      "text-anchor": "middle",
      "font-size": 13,
    }),
  );
  return document(width, height, body);
}

/** The parameter column that actually varies (first of them on ties). */
function sweptParameter(table: Table): { name: string } {
  const cut = table.columns.indexOf("final_kl");
  const params = table.columns.slice(0, cut);
  if (params.length === 0) {
    throw new SchemaError('curve input has no parameter column before "final_kl"');
  }
  for (const name of params) {
    if (distinct(numericColumn(table, name)).length > 1) return { name };
  }
  return { name: params[0] };
}
