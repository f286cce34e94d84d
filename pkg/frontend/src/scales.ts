import { scaleLinear, scaleLog, format } from "d3";
import { line, text } from "./svg.js";

export type Scale = ReturnType<typeof scaleLinear<number, number>>;

export interface Frame {
  left: number;
  top: number;
  width: number;
  height: number;
}

export function linearScale(domain: [number, number], range: [number, number]) {
  return scaleLinear<number, number>().domain(pad(domain)).range(range).nice();
}

export function logScale(domain: [number, number], range: [number, number]) {
  return scaleLog<number, number>().domain(domain).range(range).nice();
}

function pad([lo, hi]: [number, number]): [number, number] {
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

/** Gray fill where t=0 is near-black and t=1 near-white (smaller = darker). */
export function grayShade(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const g = Math.round(30 + 200 * clamped);
  return `rgb(${g},${g},${g})`;
}

/** Log-normalize a positive value onto [0,1] for shading. */
export function logNorm(value: number, min: number, max: number): number {
  if (min <= 0 || max <= min) return 0.5;
  const v = Math.max(value, min);
  return (Math.log(v) - Math.log(min)) / (Math.log(max) - Math.log(min));
}

const tickFormat = format("~g");

export function xAxis(scale: any, frame: Frame, label: string): string[] {
  const y0 = frame.top + frame.height;
  const out = [line(frame.left, y0, frame.left + frame.width, y0)];
  for (const t of scale.ticks(5)) {
    const x = scale(t);
    out.push(line(x, y0, x, y0 + 4));
    out.push(text(x, y0 + 16, tickFormat(t), { "text-anchor": "middle" }));
  }
  out.push(
    text(frame.left + frame.width / 2, y0 + 32, label, {
      "text-anchor": "middle",
      "font-size": 12,
    }),
  );
  return out;
}

export function yAxis(scale: any, frame: Frame, label: string): string[] {
  const out = [line(frame.left, frame.top, frame.left, frame.top + frame.height)];
  for (const t of scale.ticks(5)) {
    const y = scale(t);
    out.push(line(frame.left - 4, y, frame.left, y));
    out.push(
      text(frame.left - 7, y + 3, tickFormat(t), { "text-anchor": "end" }),
    );
  }
  out.push(
    text(14, frame.top + frame.height / 2, label, {
      "text-anchor": "middle",
      "font-size": 12,
      transform: `rotate(-90 14 ${frame.top + frame.height / 2})`,
    }),
  );
  return out;
}
