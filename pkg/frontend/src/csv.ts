/**
 * Minimal CSV reading for fincluster workspace exports.
 *
 * The exports are plain comma-separated tables with a header row and no
 * quoting (labels are simple identifiers), so a split-based parser is
 * enough; blank trailing lines are ignored.
 */

import { readFileSync } from "node:fs";

export interface Table {
  header: string[];
  rows: string[][];
}

/** Thrown when an artifact does not carry an expected column. */
export class SchemaError extends Error {
  constructor(public readonly column: string, public readonly file: string) {
    super(`missing column '${column}' in ${file}`);
  }
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    return { header: [], rows: [] };
  }
  const [first, ...rest] = lines;
  return {
    header: first.split(",").map((cell) => cell.trim()),
    rows: rest.map((line) => line.split(",").map((cell) => cell.trim())),
  };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Column accessor; missing columns raise a SchemaError naming the column. */
export function columnIndex(table: Table, name: string, file: string): number {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new SchemaError(name, file);
  }
  return index;
}

/** Convenience: rows as objects keyed by the requested columns. */
export function records(
  table: Table,
  names: string[],
  file: string,
): Record<string, string>[] {
  const indices = names.map((name) => columnIndex(table, name, file));
  return table.rows.map((row) => {
    const record: Record<string, string> = {};
    names.forEach((name, i) => {
      record[name] = row[indices[i]] ?? "";
    });
    return record;
  });
}
