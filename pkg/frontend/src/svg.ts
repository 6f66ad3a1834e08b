/**
 * Small SVG building blocks: escaping, color ramps, axes.
 *
 * Figures are plain SVG strings; no DOM and no chart library. Row/column
 * labels carry class attributes (row-label, col-label, leaf-label) so tests
 * and downstream tooling can read axis order straight out of the document.
 */

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export type ColorMap = "heat" | "blue";

/** Piecewise-linear ramps; t in [0, 1]. "heat" runs white -> red -> dark red. */
export function colorAt(map: ColorMap, t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const stops: [number, number, number][] =
    map === "heat"
      ? [
          [255, 255, 245],
          [254, 224, 144],
          [252, 141, 89],
          [215, 48, 39],
          [120, 10, 20],
        ]
      : [
          [247, 251, 255],
          [198, 219, 239],
          [107, 174, 214],
          [33, 113, 181],
          [8, 48, 107],
        ];
  const scaled = clamped * (stops.length - 1);
  const low = Math.min(Math.floor(scaled), stops.length - 2);
  const frac = scaled - low;
  const mix = stops[low].map((c, i) => Math.round(c + frac * (stops[low + 1][i] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}

export function textEl(
  x: number,
  y: number,
  content: string,
  opts: { size?: number; anchor?: string; klass?: string; rotate?: number } = {},
): string {
  const size = opts.size ?? 10;
  const anchor = opts.anchor ?? "start";
  const klass = opts.klass ? ` class="${opts.klass}"` : "";
  const transform =
    opts.rotate !== undefined ? ` transform="rotate(${opts.rotate} ${x} ${y})"` : "";
  return (
    `<text x="${x}" y="${y}" font-size="${size}" text-anchor="${anchor}"` +
    `${klass}${transform}>${escapeXml(content)}</text>`
  );
}

export function rect(
  x: number,
  y: number,
  w: number,
  h: number,
  fill: string,
  title?: string,
): string {
  const tooltip = title ? `<title>${escapeXml(title)}</title>` : "";
  return `<rect x="${x}" y="${y}" width="${w}" height="${h}" fill="${fill}">${tooltip}</rect>`;
}

export function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  stroke = "#333",
  width = 1,
): string {
  return `<line x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" stroke="${stroke}" stroke-width="${width}"/>`;
}

export function polyline(
  points: [number, number][],
  stroke: string,
  width = 1,
  opacity = 1,
): string {
  const coords = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
  return (
    `<polyline points="${coords}" fill="none" stroke="${stroke}" ` +
    `stroke-width="${width}" stroke-opacity="${opacity}"/>`
  );
}

/** Round axis ticks: at most `count` of them, on a 1/2/5 grid. */
export function ticks(min: number, max: number, count = 5): number[] {
  if (!(max > min)) {
    return [min];
  }
  const rawStep = (max - min) / count;
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((s) => s * power).find((s) => s >= rawStep) ?? rawStep;
  const start = Math.ceil(min / step) * step;
  const out: number[] = [];
  for (let v = start; v <= max + 1e-12; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

export function formatNumber(value: number): string {
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1000) return value.toExponential(1);
  if (magnitude >= 10) return value.toFixed(0);
  if (magnitude >= 0.01) return value.toFixed(2);
  return value.toExponential(1);
}

/** Categorical colors for cluster members. */
export const PALETTE = [
  "#4363d8", "#e6194b", "#3cb44b", "#f58231", "#911eb4",
  "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324",
];
