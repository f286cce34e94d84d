import { readFile, writeFile } from "node:fs/promises";
import { basename, dirname, extname, join } from "node:path";
import { parseArgs } from "node:util";
import { Resvg } from "@resvg/resvg-js";

import { renderCalibration } from "./calibration.js";
import { SchemaError, parseCsv } from "./csv.js";
import { renderCurve } from "./curve.js";
import { renderHeatmap } from "./heatmap.js";
import { renderStrategy } from "./strategy.js";

const KINDS: Record<string, (table: ReturnType<typeof parseCsv>) => string> = {
  curve: renderCurve,
  heatmap: renderHeatmap,
  calibration: renderCalibration,
  strategy: renderStrategy,
};

const USAGE = `usage: plots <kind> <input.csv> [-o out.png|out.svg]
kinds: ${Object.keys(KINDS).join(", ")}`;

export async function main(argv: string[]): Promise<number> {
  let positionals: string[];
  let output: string | undefined;
  try {
    const parsed = parseArgs({
      args: argv,
      options: { output: { type: "string", short: "o" } },
      allowPositionals: true,
    });
    positionals = parsed.positionals;
    output = parsed.values.output;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }

  if (positionals.length !== 2) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  const [kind, input] = positionals;
  const render = KINDS[kind];
  if (!render) {
    process.stderr.write(`error: unknown kind "${kind}"; expected one of ${Object.keys(KINDS).join(", ")}\n`);
    return 2;
  }

  const outPath = output ?? defaultOutput(input, kind);
  const ext = extname(outPath).toLowerCase();
  if (ext !== ".png" && ext !== ".svg") {
    process.stderr.write(`error: output must end in .png or .svg, got "${outPath}"\n`);
    return 2;
  }

  let svg: string;
  try {
    svg = render(parseCsv(await readFile(input, "utf8")));
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: cannot read ${input}\n`);
      return 1;
    }
    throw err;
  }

  if (ext === ".svg") {
    await writeFile(outPath, svg);
  } else {
    const png = new Resvg(svg, { fitTo: { mode: "zoom", value: 2 } }).render().asPng();
    await writeFile(outPath, png);
  }
  process.stdout.write(`wrote ${outPath}\n`);
  return 0;
}

function defaultOutput(input: string, kind: string): string {
  const stem = basename(input, extname(input));
  return join(dirname(input), `${stem}_${kind}.png`);
}
