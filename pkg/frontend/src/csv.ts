import Papa from "papaparse";

/** Raised when an input file does not carry the columns a plot kind needs. */
export class SchemaError extends Error {}

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const result = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0];
    throw new SchemaError(`CSV parse error: ${first.message} (row ${first.row})`);
  }
  const columns = result.meta.fields ?? [];
  if (columns.length === 0) {
    throw new SchemaError("CSV has no header row");
  }
  return { columns, rows: result.data };
}

export function requireColumns(table: Table, needed: string[], kind: string): void {
  for (const name of needed) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`${kind} input is missing column "${name}"`);
    }
  }
}

/** All values of one column as finite numbers; names the column on bad cells. */
export function numericColumn(table: Table, name: string): number[] {
  return table.rows.map((row, i) => {
    const value = Number(row[name]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(
        `column "${name}" has non-numeric value ${JSON.stringify(row[name])} at data row ${i + 1}`,
      );
    }
    return value;
  });
}

export function distinct(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}
