/**
 * Grouped bar charts with confidence whiskers, rendered as standalone SVG.
 *
 * Rendering is a pure function of (rows, spec): fixed canvas, fixed palette,
 * fixed number formatting, no timestamps or randomness, so a re-render of the
 * same inputs reproduces the output byte for byte (golden-file testable).
 */

import { FigureSpec, SummaryRow } from "./schema.js";

const WIDTH = 860;
const HEIGHT = 500;
const MARGIN = { top: 52, right: 26, bottom: 72, left: 84 };

const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

function fmt(v: number): string {
  return v.toFixed(2);
}

function fmtValue(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a < 1e-3 || a >= 1e4) return v.toExponential(2);
  return String(Number(v.toPrecision(4)));
}

function niceCeil(v: number): number {
  if (v <= 0) return 1;
  const exp = Math.floor(Math.log10(v));
  const base = Math.pow(10, exp);
  const frac = v / base;
  const nice = frac <= 1 ? 1 : frac <= 2 ? 2 : frac <= 2.5 ? 2.5 : frac <= 5 ? 5 : 10;
  return nice * base;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function distinctInOrder(values: string[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const v of values) {
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}

/** Render the grouped bar chart for the given summary rows. */
export function renderBars(rows: SummaryRow[], spec: FigureSpec): string {
  if (rows.length === 0) {
    throw new Error("no rows to render");
  }
  const groupOf = (r: SummaryRow) => (spec.groupBy === "design" ? r.design : r.env);
  const seriesOf = (r: SummaryRow) => (spec.groupBy === "design" ? r.env : r.design);
  const groups = distinctInOrder(rows.map(groupOf));
  const series = distinctInOrder(rows.map(seriesOf));

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const yMax = niceCeil(Math.max(...rows.map((r) => r.mseMean + r.ciHalfWidth)) * 1.05);
  const yOf = (v: number) => MARGIN.top + plotH * (1 - v / yMax);

  const band = plotW / groups.length;
  const inner = band * 0.82;
  const barW = inner / series.length;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  if (spec.title) {
    parts.push(
      `<text x="${fmt(WIDTH / 2)}" y="28" text-anchor="middle" font-size="17" ` +
      `fill="#222222">${esc(spec.title)}</text>`,
    );
  }

  // y axis with 5 gridded ticks
  for (let i = 0; i <= 5; i++) {
    const v = (yMax * i) / 5;
    const y = yOf(v);
    parts.push(
      `<line x1="${fmt(MARGIN.left)}" y1="${fmt(y)}" x2="${fmt(WIDTH - MARGIN.right)}" ` +
      `y2="${fmt(y)}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${fmt(MARGIN.left - 8)}" y="${fmt(y + 4)}" text-anchor="end" ` +
      `font-size="12" fill="#444444">${fmtValue(v)}</text>`,
    );
  }
  if (spec.yLabel) {
    parts.push(
      `<text x="20" y="${fmt(MARGIN.top + plotH / 2)}" text-anchor="middle" font-size="13" ` +
      `fill="#222222" transform="rotate(-90 20 ${fmt(MARGIN.top + plotH / 2)})">` +
      `${esc(spec.yLabel)}</text>`,
    );
  }

  // bars and whiskers
  groups.forEach((group, gi) => {
    const x0 = MARGIN.left + gi * band + (band - inner) / 2;
    series.forEach((name, si) => {
      const row = rows.find((r) => groupOf(r) === group && seriesOf(r) === name);
      if (!row) return;
      const x = x0 + si * barW;
      const yTop = yOf(row.mseMean);
      parts.push(
        `<rect x="${fmt(x)}" y="${fmt(yTop)}" width="${fmt(barW * 0.9)}" ` +
        `height="${fmt(yOf(0) - yTop)}" fill="${PALETTE[si % PALETTE.length]}" ` +
        `class="bar" data-design="${esc(name)}" data-group="${esc(group)}"/>`,
      );
      const cx = x + barW * 0.45;
      const yLo = yOf(Math.max(row.mseMean - row.ciHalfWidth, 0));
      const yHi = yOf(row.mseMean + row.ciHalfWidth);
      const cap = barW * 0.22;
      parts.push(
        `<line x1="${fmt(cx)}" y1="${fmt(yLo)}" x2="${fmt(cx)}" y2="${fmt(yHi)}" ` +
        `stroke="#222222" stroke-width="1.2" class="whisker"/>`,
      );
      for (const yc of [yLo, yHi]) {
        parts.push(
          `<line x1="${fmt(cx - cap)}" y1="${fmt(yc)}" x2="${fmt(cx + cap)}" ` +
          `y2="${fmt(yc)}" stroke="#222222" stroke-width="1.2"/>`,
        );
      }
    });
    parts.push(
      `<text x="${fmt(MARGIN.left + gi * band + band / 2)}" y="${fmt(HEIGHT - MARGIN.bottom + 22)}" ` +
      `text-anchor="middle" font-size="13" fill="#222222">${esc(group)}</text>`,
    );
  });

  // axis line and x label
  parts.push(
    `<line x1="${fmt(MARGIN.left)}" y1="${fmt(yOf(0))}" x2="${fmt(WIDTH - MARGIN.right)}" ` +
    `y2="${fmt(yOf(0))}" stroke="#222222" stroke-width="1.5"/>`,
  );
  if (spec.xLabel) {
    parts.push(
      `<text x="${fmt(MARGIN.left + plotW / 2)}" y="${fmt(HEIGHT - 16)}" text-anchor="middle" ` +
      `font-size="13" fill="#222222">${esc(spec.xLabel)}</text>`,
    );
  }

  // legend, one swatch per series
  series.forEach((name, si) => {
    const lx = MARGIN.left + 10 + si * 130;
    const ly = MARGIN.top - 14;
    parts.push(
      `<rect x="${fmt(lx)}" y="${fmt(ly - 10)}" width="12" height="12" ` +
      `fill="${PALETTE[si % PALETTE.length]}"/>`,
    );
    parts.push(
      `<text x="${fmt(lx + 17)}" y="${fmt(ly)}" font-size="12" fill="#222222">` +
      `${esc(name)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
