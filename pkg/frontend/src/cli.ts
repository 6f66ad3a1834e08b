/**
 * Render one figure family from fincluster workspace exports to an SVG file.
 *
 * Usage:
 *   node dist/src/cli.js heatmap    --table ws/heatmap_tables.csv --metric latent --output fig.svg
 *   node dist/src/cli.js matrix     --matrix ws/distance_matrix.csv [--order ws/leaf_order.csv] --output fig.svg
 *   node dist/src/cli.js curves     --curve ws/validation_curve.csv --output fig.svg
 *   node dist/src/cli.js scatter    --latent ws/latent.csv --assignments ws/assignments.csv
 *                                   --centers ws/centers.csv [--method kmeans_dtw] --output fig.svg
 *   node dist/src/cli.js dendrogram --dendrogram ws/dendrogram.csv --matrix ws/distance_matrix.csv
 *                                   [--order ws/leaf_order.csv] --output fig.svg
 *
 * Style flags: --color-map heat|blue, --annotate. Exit code 0 on success,
 * 2 on missing arguments, unreadable inputs, or schema mismatches.
 */

import { existsSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { SchemaError, columnIndex, readCsv } from "./csv.js";
import {
  StyleOptions,
  renderCurves,
  renderDendrogram,
  renderHeatmap,
  renderMatrix,
  renderScatter,
} from "./figures.js";
import { ColorMap } from "./svg.js";

export const FAMILIES = ["heatmap", "matrix", "curves", "scatter", "dendrogram"] as const;
export type Family = (typeof FAMILIES)[number];

class UsageError extends Error {}

function parseArgs(argv: string[]): { family: Family; flags: Map<string, string> } {
  if (argv.length === 0) {
    throw new UsageError(`expected a figure family: ${FAMILIES.join(", ")}`);
  }
  const family = argv[0] as Family;
  if (!FAMILIES.includes(family)) {
    throw new UsageError(`unknown figure family '${argv[0]}'; expected ${FAMILIES.join(", ")}`);
  }
  const flags = new Map<string, string>();
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new UsageError(`unexpected argument '${arg}'`);
    }
    const name = arg.slice(2);
    if (name === "annotate") {
      flags.set(name, "true");
      continue;
    }
    const value = argv[++i];
    if (value === undefined) {
      throw new UsageError(`flag --${name} needs a value`);
    }
    flags.set(name, value);
  }
  return { family, flags };
}

function requireFlag(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new UsageError(`missing required flag --${name}`);
  }
  return value;
}

function readArtifact(path: string) {
  if (!existsSync(path)) {
    throw new UsageError(`input artifact not found: ${path}`);
  }
  return readCsv(path);
}

function readLeafOrder(path: string): string[] {
  const table = readArtifact(path);
  const company = columnIndex(table, "company", path);
  return table.rows.map((row) => row[company]);
}

export function render(family: Family, flags: Map<string, string>): string {
  const style: StyleOptions = {
    colorMap: (flags.get("color-map") as ColorMap | undefined) ?? undefined,
    annotate: flags.get("annotate") === "true",
  };
  switch (family) {
    case "heatmap": {
      const path = requireFlag(flags, "table");
      return renderHeatmap(readArtifact(path), path, requireFlag(flags, "metric"), style);
    }
    case "matrix": {
      const path = requireFlag(flags, "matrix");
      const orderPath = flags.get("order");
      const order = orderPath ? readLeafOrder(orderPath) : null;
      return renderMatrix(readArtifact(path), path, order, style);
    }
    case "curves": {
      const path = requireFlag(flags, "curve");
      return renderCurves(readArtifact(path), path);
    }
    case "scatter": {
      const latentPath = requireFlag(flags, "latent");
      const assignmentsPath = requireFlag(flags, "assignments");
      const centersPath = requireFlag(flags, "centers");
      return renderScatter(
        readArtifact(latentPath),
        latentPath,
        readArtifact(assignmentsPath),
        assignmentsPath,
        readArtifact(centersPath),
        centersPath,
        flags.get("method") ?? "kmeans_dtw",
      );
    }
    case "dendrogram": {
      const dendPath = requireFlag(flags, "dendrogram");
      const matrixPath = requireFlag(flags, "matrix");
      const matrix = readArtifact(matrixPath);
      columnIndex(matrix, "company", matrixPath);
      const orderPath = flags.get("order");
      const order = orderPath ? readLeafOrder(orderPath) : null;
      return renderDendrogram(readArtifact(dendPath), dendPath, matrix.header.slice(1), order);
    }
  }
}

export function main(argv: string[]): number {
  try {
    const { family, flags } = parseArgs(argv);
    const output = requireFlag(flags, "output");
    const svg = render(family, flags);
    writeFileSync(output, svg);
    console.log(output);
    return 0;
  } catch (error) {
    if (error instanceof UsageError || error instanceof SchemaError || error instanceof Error) {
      console.error(`fincluster-plots: error: ${(error as Error).message}`);
      return 2;
    }
    throw error;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
