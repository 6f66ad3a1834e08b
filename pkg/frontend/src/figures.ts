/**
 * Figure renderers for fincluster workspace exports.
 *
 * Every renderer reads already-exported tables and draws them; nothing is
 * recomputed analytically here. Families:
 *
 *   heatmap     entity x period grid for one metric of heatmap_tables.csv
 *   matrix      distance matrix, optionally reordered by the leaf order
 *   curves      silhouette and distortion vs candidate cluster count
 *   scatter     per-cluster latent series with bold barycenter overlays
 *   dendrogram  merge tree with heights on the vertical axis
 */

import { SchemaError, Table, columnIndex, records } from "./csv.js";
import {
  ColorMap,
  PALETTE,
  colorAt,
  formatNumber,
  line,
  polyline,
  rect,
  svgDocument,
  textEl,
  ticks,
} from "./svg.js";

export interface StyleOptions {
  colorMap?: ColorMap;
  annotate?: boolean;
}

const MARGIN = { top: 36, right: 24, bottom: 56, left: 110 };

function uniqueInOrder(values: string[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const value of values) {
    if (!seen.has(value)) {
      seen.add(value);
      out.push(value);
    }
  }
  return out;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  return [lo, hi];
}

/** entity x period heatmap for one metric of the long-format table. */
export function renderHeatmap(
  table: Table,
  file: string,
  metric: string,
  style: StyleOptions = {},
): string {
  const rows = records(table, ["entity", "period", "metric", "value"], file);
  const subset = rows.filter((r) => r.metric === metric);
  if (subset.length === 0) {
    const known = uniqueInOrder(rows.map((r) => r.metric));
    throw new Error(`metric '${metric}' not present in ${file}; has: ${known.join(", ")}`);
  }
  const entities = uniqueInOrder(subset.map((r) => r.entity));
  const periods = uniqueInOrder(subset.map((r) => r.period));
  const cellKey = (entity: string, period: string) => entity + String.fromCharCode(0) + period;
  const value = new Map(subset.map((r) => [cellKey(r.entity, r.period), Number(r.value)]));

  const cellW = Math.max(10, Math.min(26, Math.floor(720 / periods.length)));
  const cellH = 18;
  const width = MARGIN.left + periods.length * cellW + MARGIN.right;
  const height = MARGIN.top + entities.length * cellH + MARGIN.bottom;
  const [lo, hi] = extent(subset.map((r) => Number(r.value)));
  const map = style.colorMap ?? "heat";

  const parts: string[] = [];
  parts.push(textEl(MARGIN.left, 20, metric, { size: 13, klass: "title" }));
  entities.forEach((entity, i) => {
    const y = MARGIN.top + i * cellH;
    parts.push(
      textEl(MARGIN.left - 6, y + cellH - 5, entity, {
        anchor: "end",
        klass: "row-label",
      }),
    );
    periods.forEach((period, j) => {
      const v = value.get(cellKey(entity, period));
      const x = MARGIN.left + j * cellW;
      if (v === undefined) {
        parts.push(rect(x, y, cellW - 1, cellH - 1, "#eee"));
        return;
      }
      const t = (v - lo) / (hi - lo);
      parts.push(rect(x, y, cellW - 1, cellH - 1, colorAt(map, t), `${entity} ${period}: ${v}`));
      if (style.annotate) {
        parts.push(
          textEl(x + cellW / 2, y + cellH - 6, formatNumber(v), {
            size: 6,
            anchor: "middle",
          }),
        );
      }
    });
  });
  const step = Math.max(1, Math.ceil(periods.length / 12));
  periods.forEach((period, j) => {
    if (j % step !== 0) return;
    const x = MARGIN.left + j * cellW + cellW / 2;
    const y = MARGIN.top + entities.length * cellH + 12;
    parts.push(textEl(x, y, period, { size: 8, anchor: "end", klass: "col-label", rotate: -45 }));
  });
  parts.push(legend(width - 140, height - 28, lo, hi, map));
  return svgDocument(width, height, parts.join("\n"));
}

function legend(x: number, y: number, lo: number, hi: number, map: ColorMap): string {
  const parts: string[] = [];
  const steps = 40;
  const w = 100;
  for (let i = 0; i < steps; i++) {
    parts.push(rect(x + (i * w) / steps, y, w / steps + 0.5, 8, colorAt(map, i / (steps - 1))));
  }
  parts.push(textEl(x - 4, y + 8, formatNumber(lo), { size: 8, anchor: "end" }));
  parts.push(textEl(x + w + 4, y + 8, formatNumber(hi), { size: 8 }));
  return parts.join("\n");
}

/** Square distance-matrix heatmap; darker marks smaller distances. */
export function renderMatrix(
  matrix: Table,
  file: string,
  order: string[] | null = null,
  style: StyleOptions = {},
): string {
  columnIndex(matrix, "company", file);
  const labels = matrix.header.slice(1);
  const byRow = new Map(matrix.rows.map((row) => [row[0], row.slice(1).map(Number)]));

  let displayLabels = labels;
  if (order !== null) {
    const missing = order.filter((label) => !labels.includes(label));
    if (missing.length > 0) {
      throw new Error(`ordering names unknown companies: ${missing.join(", ")}`);
    }
    if (order.length !== labels.length) {
      throw new Error(`ordering has ${order.length} entries for ${labels.length} companies`);
    }
    displayLabels = order;
  }
  const index = new Map(labels.map((label, i) => [label, i]));
  const values: number[] = [];
  for (const row of byRow.values()) values.push(...row);
  const [lo, hi] = extent(values);
  const map = style.colorMap ?? "blue";

  const cell = Math.max(12, Math.min(30, Math.floor(560 / displayLabels.length)));
  const width = MARGIN.left + displayLabels.length * cell + MARGIN.right;
  const height = MARGIN.top + displayLabels.length * cell + MARGIN.bottom + 40;

  const parts: string[] = [];
  const title = order ? "DTW distance matrix (leaf order)" : "DTW distance matrix";
  parts.push(textEl(MARGIN.left, 20, title, { size: 13, klass: "title" }));
  displayLabels.forEach((rowLabel, i) => {
    const y = MARGIN.top + i * cell;
    parts.push(
      textEl(MARGIN.left - 6, y + cell - Math.max(3, cell / 2 - 4), rowLabel, {
        anchor: "end",
        size: 9,
        klass: "row-label",
      }),
    );
    const rowValues = byRow.get(rowLabel);
    if (!rowValues) {
      throw new Error(`row for company '${rowLabel}' missing in ${file}`);
    }
    displayLabels.forEach((colLabel, j) => {
      const v = rowValues[index.get(colLabel)!];
      // dark = close, light = far
      const t = 1 - (v - lo) / (hi - lo);
      parts.push(
        rect(MARGIN.left + j * cell, y, cell - 1, cell - 1, colorAt(map, t), `${rowLabel} / ${colLabel}: ${v}`),
      );
    });
  });
  displayLabels.forEach((colLabel, j) => {
    const x = MARGIN.left + j * cell + cell / 2;
    const y = MARGIN.top + displayLabels.length * cell + 10;
    parts.push(textEl(x, y, colLabel, { size: 9, anchor: "end", klass: "col-label", rotate: -60 }));
  });
  parts.push(legend(width - 140, height - 20, hi, lo, map)); // reversed: dark = small
  return svgDocument(width, height, parts.join("\n"));
}

/** Two-panel validation figure: silhouette and distortion vs m. */
export function renderCurves(curve: Table, file: string): string {
  const rows = records(curve, ["m", "silhouette", "distortion"], file);
  const ms = rows.map((r) => Number(r.m));
  const panels: [string, number[]][] = [
    ["mean silhouette", rows.map((r) => Number(r.silhouette))],
    ["distortion", rows.map((r) => Number(r.distortion))],
  ];
  const panelW = 330;
  const panelH = 240;
  const width = panelW * 2 + 60;
  const height = panelH + 80;
  const parts: string[] = [];

  panels.forEach(([label, values], panel) => {
    const x0 = 50 + panel * (panelW + 20);
    const y0 = 40;
    const [lo, hi] = extent(values);
    const padded: [number, number] = [lo - 0.08 * (hi - lo), hi + 0.08 * (hi - lo)];
    const sx = (m: number) =>
      x0 + ((m - ms[0]) / Math.max(1, ms[ms.length - 1] - ms[0])) * (panelW - 40);
    const sy = (v: number) => y0 + panelH - ((v - padded[0]) / (padded[1] - padded[0])) * panelH;

    parts.push(textEl(x0, 24, label, { size: 12, klass: "title" }));
    parts.push(line(x0, y0, x0, y0 + panelH));
    parts.push(line(x0, y0 + panelH, x0 + panelW - 40, y0 + panelH));
    for (const tick of ticks(padded[0], padded[1], 5)) {
      parts.push(textEl(x0 - 4, sy(tick) + 3, formatNumber(tick), { size: 8, anchor: "end" }));
      parts.push(line(x0 - 2, sy(tick), x0, sy(tick)));
    }
    for (const m of ms) {
      parts.push(textEl(sx(m), y0 + panelH + 14, String(m), { size: 9, anchor: "middle" }));
    }
    parts.push(textEl(x0 + (panelW - 40) / 2, y0 + panelH + 30, "clusters m", { size: 10, anchor: "middle" }));
    parts.push(polyline(ms.map((m, i) => [sx(m), sy(values[i])]), "#2171b5", 1.5));
    ms.forEach((m, i) => {
      parts.push(
        `<circle cx="${sx(m).toFixed(2)}" cy="${sy(values[i]).toFixed(2)}" r="3" fill="#2171b5"/>`,
      );
    });
  });
  return svgDocument(width, height, parts.join("\n"));
}

/** Per-cluster latent scatter with the exported barycenter drawn bold. */
export function renderScatter(
  latent: Table,
  latentFile: string,
  assignments: Table,
  assignmentsFile: string,
  centers: Table,
  centersFile: string,
  method = "kmeans_dtw",
): string {
  const latentRows = records(latent, ["company", "year", "quarter", "z"], latentFile);
  const assignRows = records(assignments, ["company", "method", "m", "label"], assignmentsFile)
    .filter((r) => r.method === method);
  if (assignRows.length === 0) {
    const methods = uniqueInOrder(records(assignments, ["method"], assignmentsFile).map((r) => r.method));
    throw new Error(`no assignments for method '${method}' in ${assignmentsFile}; has: ${methods.join(", ")}`);
  }
  const centerRows = records(centers, ["cluster", "year", "quarter", "value"], centersFile);

  const labelOf = new Map(assignRows.map((r) => [r.company, Number(r.label)]));
  const companies = uniqueInOrder(latentRows.map((r) => r.company));
  const periods = uniqueInOrder(latentRows.map((r) => `${r.year}Q${r.quarter}`));
  const series = new Map<string, number[]>(companies.map((c) => [c, []]));
  for (const row of latentRows) {
    series.get(row.company)!.push(Number(row.z));
  }

  const clusters = [...new Set(assignRows.map((r) => Number(r.label)))].sort((a, b) => a - b);
  const centerSeries = new Map<number, number[]>(clusters.map((k) => [k, []]));
  for (const row of centerRows) {
    const k = Number(row.cluster);
    centerSeries.get(k)?.push(Number(row.value));
  }

  const allValues = latentRows.map((r) => Number(r.z)).concat(centerRows.map((r) => Number(r.value)));
  const [lo, hi] = extent(allValues);
  const pad = 0.08 * (hi - lo);

  const cols = Math.min(2, clusters.length);
  const rowsOfPanels = Math.ceil(clusters.length / cols);
  const panelW = 340;
  const panelH = 200;
  const width = cols * (panelW + 30) + 40;
  const height = rowsOfPanels * (panelH + 60) + 40;
  const parts: string[] = [];

  clusters.forEach((k, panel) => {
    const px = 40 + (panel % cols) * (panelW + 30);
    const py = 30 + Math.floor(panel / cols) * (panelH + 60);
    const sx = (j: number) => px + (j / Math.max(1, periods.length - 1)) * (panelW - 30);
    const sy = (v: number) => py + panelH - ((v - (lo - pad)) / (hi - lo + 2 * pad)) * panelH;

    const members = companies.filter((c) => labelOf.get(c) === k);
    parts.push(textEl(px, py - 8, `cluster ${k} (${members.length} companies)`, { size: 12, klass: "title" }));
    parts.push(line(px, py, px, py + panelH));
    parts.push(line(px, py + panelH, px + panelW - 30, py + panelH));
    for (const tick of ticks(lo - pad, hi + pad, 4)) {
      parts.push(textEl(px - 4, sy(tick) + 3, formatNumber(tick), { size: 8, anchor: "end" }));
    }
    members.forEach((company, i) => {
      const values = series.get(company)!;
      const color = PALETTE[i % PALETTE.length];
      parts.push(polyline(values.map((v, j) => [sx(j), sy(v)]), color, 0.9, 0.75));
      values.forEach((v, j) => {
        parts.push(
          `<circle cx="${sx(j).toFixed(2)}" cy="${sy(v).toFixed(2)}" r="1.6" fill="${color}" fill-opacity="0.8"/>`,
        );
      });
      parts.push(
        textEl(px + panelW - 26, py + 10 + i * 10, company, { size: 8, klass: "member-label" }),
      );
    });
    const center = centerSeries.get(k) ?? [];
    if (center.length > 0) {
      parts.push(polyline(center.map((v, j) => [sx(j), sy(v)]), "#111", 2.8));
    }
  });
  return svgDocument(width, height, parts.join("\n"));
}

interface MergeRow {
  left: number;
  right: number;
  height: number;
  size: number;
}

/** Dendrogram from the merge table; leaf labels follow the leaf order. */
export function renderDendrogram(
  dendrogram: Table,
  dendrogramFile: string,
  labels: string[],
  order: string[] | null = null,
): string {
  const merges: MergeRow[] = records(dendrogram, ["left", "right", "height", "size"], dendrogramFile).map(
    (r) => ({
      left: Number(r.left),
      right: Number(r.right),
      height: Number(r.height),
      size: Number(r.size),
    }),
  );
  const n = merges.length + 1;
  if (labels.length !== n) {
    throw new Error(`${labels.length} labels for ${n} leaves in ${dendrogramFile}`);
  }

  // Leaf x positions follow the provided order (falling back to the tree's
  // own in-order traversal when absent).
  let leafOrder: number[];
  if (order !== null) {
    leafOrder = order.map((label) => {
      const index = labels.indexOf(label);
      if (index < 0) {
        throw new Error(`ordering names unknown company '${label}'`);
      }
      return index;
    });
  } else {
    leafOrder = [];
    const walk = (node: number): void => {
      if (node < n) {
        leafOrder.push(node);
        return;
      }
      const merge = merges[node - n];
      walk(merge.left);
      walk(merge.right);
    };
    walk(n + merges.length - 1);
  }

  const width = Math.max(480, 40 * n + 120);
  const height = 420;
  const plotH = height - 120;
  const maxHeight = Math.max(...merges.map((m) => m.height));
  const xOf = new Map<number, number>();
  const yOf = new Map<number, number>();
  leafOrder.forEach((leaf, pos) => {
    xOf.set(leaf, 80 + pos * ((width - 140) / Math.max(1, n - 1)));
    yOf.set(leaf, 40 + plotH);
  });
  const sy = (h: number) => 40 + plotH - (h / maxHeight) * plotH;

  const parts: string[] = [];
  parts.push(textEl(80, 20, "complete-linkage dendrogram", { size: 13, klass: "title" }));
  merges.forEach((merge, step) => {
    const node = n + step;
    const xl = xOf.get(merge.left);
    const xr = xOf.get(merge.right);
    const yl = yOf.get(merge.left);
    const yr = yOf.get(merge.right);
    if (xl === undefined || xr === undefined || yl === undefined || yr === undefined) {
      throw new Error(`merge ${step} references an unknown node in ${dendrogramFile}`);
    }
    const y = sy(merge.height);
    parts.push(line(xl, yl, xl, y, "#555", 1.2));
    parts.push(line(xr, yr, xr, y, "#555", 1.2));
    parts.push(line(xl, y, xr, y, "#555", 1.2));
    xOf.set(node, (xl + xr) / 2);
    yOf.set(node, y);
  });
  // vertical axis: merge height
  parts.push(line(60, 40, 60, 40 + plotH));
  for (const tick of ticks(0, maxHeight, 5)) {
    parts.push(textEl(56, sy(tick) + 3, formatNumber(tick), { size: 8, anchor: "end" }));
    parts.push(line(58, sy(tick), 60, sy(tick)));
  }
  parts.push(textEl(16, 40 + plotH / 2, "cluster distance", { size: 10, anchor: "middle", rotate: -90 }));
  leafOrder.forEach((leaf) => {
    const x = xOf.get(leaf)!;
    parts.push(
      textEl(x, 40 + plotH + 14, labels[leaf], { size: 9, anchor: "end", klass: "leaf-label", rotate: -60 }),
    );
  });
  return svgDocument(width, height, parts.join("\n"));
}
