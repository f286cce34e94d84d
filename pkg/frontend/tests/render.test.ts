import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  SchemaError,
  numericColumn,
  parseCsv,
  renderCalibration,
  renderCurve,
  renderHeatmap,
  renderStrategy,
} from "../src/index.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture(name: string) {
  return parseCsv(readFileSync(join(FIXTURES, name), "utf8"));
}

function grayLevel(fill: string): number {
  const m = /^rgb\((\d+),(\d+),(\d+)\)$/.exec(fill);
  if (!m) throw new Error(`not a gray fill: ${fill}`);
  return Number(m[1]);
}

describe("csv parsing", () => {
  it("reads the golden scan table", () => {
    const table = fixture("visibility.csv");
    expect(table.columns).toContain("final_kl");
    expect(table.rows).toHaveLength(4);
    expect(numericColumn(table, "V")).toEqual([0.0, 0.4, 0.8, 1.0]);
  });

  it("names the column on non-numeric cells", () => {
    const table = parseCsv("a,b\n1,oops\n");
    expect(() => numericColumn(table, "b")).toThrow(/column "b".*"oops"/);
  });

  it("rejects empty input", () => {
    expect(() => parseCsv("")).toThrow(SchemaError);
  });
});

describe("curve", () => {
  it("renders one polyline per result metric", () => {
    const svg = renderCurve(fixture("visibility.csv"));
    expect(svg).toContain("<svg");
    expect((svg.match(/<polyline/g) ?? []).length).toBe(3);
    for (const label of ["final_kl", "final_euclid", "best_raw_loss"]) {
      expect(svg).toContain(label);
    }
  });

  it("picks the swept parameter for the x axis", () => {
    // u2 is constant in the visibility fixture; V varies
    const svg = renderCurve(fixture("visibility.csv"));
    expect(svg).toContain("fitted distance vs V");
  });

  it("names the missing column on schema mismatch", () => {
    expect(() => renderCurve(fixture("calibration.csv")))
      .toThrow('curve input is missing column "final_kl"');
  });
});

describe("heatmap", () => {
  it("renders one cell per grid point", () => {
    const table = fixture("grid2d.csv");
    const svg = renderHeatmap(table);
    const fills = [...svg.matchAll(/<rect [^>]*fill="(rgb\(\d+,\d+,\d+\))"/g)];
    // 9 grid cells + 24 colorbar steps
    expect(fills.length).toBe(9 + 24);
  });

  it("shades lower KL darker", () => {
    const table = fixture("grid2d.csv");
    const kls = numericColumn(table, "final_kl");
    const svg = renderHeatmap(table);
    const cellFills = [...svg.matchAll(/<rect [^>]*fill="(rgb\(\d+,\d+,\d+\))"/g)]
      .slice(0, kls.length)
      .map((m) => grayLevel(m[1]));
    const lowest = kls.indexOf(Math.min(...kls));
    const highest = kls.indexOf(Math.max(...kls));
    expect(cellFills[lowest]).toBeLessThan(cellFills[highest]);
    // order preserved in general, not just at the extremes
    for (let i = 0; i < kls.length; i++) {
      for (let j = 0; j < kls.length; j++) {
        if (kls[i] < kls[j]) expect(cellFills[i]).toBeLessThanOrEqual(cellFills[j]);
      }
    }
  });

  it("names the missing column on schema mismatch", () => {
    expect(() => renderHeatmap(fixture("visibility.csv")))
      .toThrow('heatmap input is missing column "theta"');
  });
});

describe("calibration", () => {
  it("renders measured and guide lines per outcome count", () => {
    const svg = renderCalibration(fixture("calibration.csv"));
    // 2 panels x 2 outcome counts x (measured + guide)
    expect((svg.match(/<polyline/g) ?? []).length).toBe(8);
    expect(svg).toContain("4 outcomes");
    expect(svg).toContain("16 outcomes");
    expect(svg).toContain("Euclidean error");
    expect(svg).toContain("KL error");
  });

  it("names the missing column on schema mismatch", () => {
    expect(() => renderCalibration(fixture("grid2d.csv")))
      .toThrow('calibration input is missing column "n_outcomes"');
  });
});

describe("strategy", () => {
  it("renders one panel per outcome at the grid resolution", () => {
    const table = fixture("strategies.csv");
    const svg = renderStrategy(table);
    expect(svg).toContain("outcome 0");
    expect(svg).toContain("outcome 3");
    const fills = [...svg.matchAll(/<rect [^>]*fill="rgb\(/g)];
    expect(fills.length).toBe(4 * 144);
  });

  it("shades higher probability darker", () => {
    const table = parseCsv(
      "lambda_a,lambda_b,p_0,p_1\n0,0,1,0\n1,0,0,1\n0,1,0.5,0.5\n1,1,0.5,0.5\n");
    const svg = renderStrategy(table);
    const fills = [...svg.matchAll(/<rect [^>]*fill="(rgb\(\d+,\d+,\d+\))"/g)]
      .map((m) => grayLevel(m[1]));
    // panel 0 cells come first, in row order: p_0 = 1, 0, 0.5, 0.5
    expect(fills[0]).toBeLessThan(fills[1]);
    expect(fills[2]).toBeGreaterThan(fills[0]);
    expect(fills[2]).toBeLessThan(fills[1]);
  });

  it("requires outcome probability columns", () => {
    expect(() => renderStrategy(parseCsv("lambda_a,lambda_b\n0,0\n")))
      .toThrow(/p_0/);
  });
});
