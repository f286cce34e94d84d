/** String-building SVG helpers: no DOM, output is a standalone document. */

const ENTITIES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
};

export function esc(text: string): string {
  return text.replace(/[&<>"]/g, (c) => ENTITIES[c]);
}

export type Attrs = Record<string, string | number>;

export function el(name: string, attrs: Attrs, children: string[] = []): string {
  const parts = Object.entries(attrs).map(([k, v]) => `${k}="${esc(String(v))}"`);
  const open = parts.length > 0 ? `<${name} ${parts.join(" ")}` : `<${name}`;
  if (children.length === 0) return `${open}/>`;
  return `${open}>${children.join("")}</${name}>`;
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return el(
    "text",
    {
      x: round(x),
      y: round(y),
      "font-family": "Helvetica, Arial, sans-serif",
      "font-size": 11,
      fill: "#222",
      ...attrs,
    },
    [esc(content)],
  );
}

export function line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs = {}): string {
  return el("line", {
    x1: round(x1), y1: round(y1), x2: round(x2), y2: round(y2),
    stroke: "#222", "stroke-width": 1,
    ...attrs,
  });
}

export function polyline(points: Array<[number, number]>, attrs: Attrs = {}): string {
  const coords = points.map(([x, y]) => `${round(x)},${round(y)}`).join(" ");
  return el("polyline", { points: coords, fill: "none", ...attrs });
}

export function rect(x: number, y: number, w: number, h: number, attrs: Attrs = {}): string {
  return el("rect", { x: round(x), y: round(y), width: round(w), height: round(h), ...attrs });
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    rect(0, 0, width, height, { fill: "#ffffff" }),
    ...body,
    "</svg>",
  ].join("\n");
}

function round(v: number): number {
  return Math.round(v * 100) / 100;
}
