// Hand-rolled SVG renderer. Pure functions of the input, no timestamps, no
// randomness, so identical options always produce identical bytes.

export interface SeriesPoint {
  x: number;
  y: number;
  lo?: number; // error-bar bottom
  hi?: number; // error-bar top
}

export interface Series {
  label: string;
  color: string;
  points: SeriesPoint[];
  dashed?: boolean;
  markers?: boolean;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  series: Series[];
  annotations?: string[];
  xTicks?: number[]; // tick positions to use instead of the computed ones
  width?: number;
  height?: number;
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const MARGIN = { top: 44, right: 224, bottom: 56, left: 84 };

interface Scale {
  toPx(v: number): number;
  ticks: number[];
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e-3 && a < 1e5) {
    const s = v.toPrecision(4);
    return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
  }
  return v.toExponential(1).replace("e-", "e-").replace("e+", "e");
}

function px(v: number): string {
  return v.toFixed(2);
}

function logTicks(lo: number, hi: number): number[] {
  const first = Math.ceil(Math.log10(lo) - 1e-9);
  const last = Math.floor(Math.log10(hi) + 1e-9);
  const step = Math.max(1, Math.ceil((last - first) / 8));
  const out: number[] = [];
  for (let e = first; e <= last; e += step) out.push(10 ** e);
  return out;
}

function linearTicks(lo: number, hi: number): number[] {
  const span = hi - lo;
  const raw = span / 5;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= 6) ?? 10 * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) out.push(v);
  return out;
}

function makeScale(values: number[], log: boolean, pxLo: number, pxHi: number): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (log) {
    if (lo <= 0) throw new Error("log axis needs positive values");
    lo /= 1.4;
    hi *= 1.4;
    const la = Math.log(lo);
    const lb = Math.log(hi);
    return {
      toPx: (v) => pxLo + ((Math.log(v) - la) / (lb - la)) * (pxHi - pxLo),
      ticks: logTicks(lo, hi),
    };
  }
  const pad = (hi - lo || Math.abs(hi) || 1) * 0.08;
  lo -= pad;
  hi += pad;
  return {
    toPx: (v) => pxLo + ((v - lo) / (hi - lo)) * (pxHi - pxLo),
    ticks: linearTicks(lo, hi),
  };
}

export function renderChart(opts: ChartOptions): string {
  const width = opts.width ?? 760;
  const height = opts.height ?? 520;
  const plotL = MARGIN.left;
  const plotR = width - MARGIN.right;
  const plotT = MARGIN.top;
  const plotB = height - MARGIN.bottom;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of opts.series) {
    for (const p of s.points) {
      xs.push(p.x);
      ys.push(p.y);
      if (p.lo !== undefined) ys.push(p.lo);
      if (p.hi !== undefined) ys.push(p.hi);
    }
  }
  if (xs.length === 0) throw new Error("nothing to plot");

  const sx = makeScale(xs, opts.xLog, plotL, plotR);
  if (opts.xTicks) sx.ticks = opts.xTicks;
  const sy = makeScale(opts.yLog ? ys.filter((v) => v > 0) : ys, opts.yLog, plotB, plotT);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${px((plotL + plotR) / 2)}" y="24" text-anchor="middle" font-size="15">${esc(opts.title)}</text>`
  );

  // axes and grid
  for (const t of sx.ticks) {
    const x = px(sx.toPx(t));
    parts.push(`<line x1="${x}" y1="${plotT}" x2="${x}" y2="${plotB}" stroke="#e0e0e0"/>`);
    parts.push(
      `<text x="${x}" y="${plotB + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`
    );
  }
  for (const t of sy.ticks) {
    const y = px(sy.toPx(t));
    parts.push(`<line x1="${plotL}" y1="${y}" x2="${plotR}" y2="${y}" stroke="#e0e0e0"/>`);
    parts.push(
      `<text x="${plotL - 6}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="11">${fmt(t)}</text>`
    );
  }
  parts.push(
    `<rect x="${plotL}" y="${plotT}" width="${plotR - plotL}" height="${plotB - plotT}" fill="none" stroke="#333"/>`
  );
  parts.push(
    `<text x="${px((plotL + plotR) / 2)}" y="${height - 14}" text-anchor="middle" font-size="13">${esc(opts.xLabel)}</text>`
  );
  parts.push(
    `<text x="20" y="${px((plotT + plotB) / 2)}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${px((plotT + plotB) / 2)})">${esc(opts.yLabel)}</text>`
  );

  for (const s of opts.series) {
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    const coords = s.points.map((p) => `${px(sx.toPx(p.x))},${px(sy.toPx(p.y))}`);
    parts.push(
      `<polyline points="${coords.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`
    );
    for (const p of s.points) {
      const x = px(sx.toPx(p.x));
      if (p.lo !== undefined && p.hi !== undefined && p.hi > p.lo) {
        const yLo = px(sy.toPx(opts.yLog ? Math.max(p.lo, minPositive(ys)) : p.lo));
        const yHi = px(sy.toPx(p.hi));
        parts.push(`<line x1="${x}" y1="${yLo}" x2="${x}" y2="${yHi}" stroke="${s.color}"/>`);
        parts.push(cap(x, yLo, s.color));
        parts.push(cap(x, yHi, s.color));
      }
      if (s.markers !== false) {
        parts.push(`<circle cx="${x}" cy="${px(sy.toPx(p.y))}" r="3" fill="${s.color}"/>`);
      }
    }
  }

  // legend and annotations in the right margin
  let ly = plotT + 8;
  for (const s of opts.series) {
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line x1="${plotR + 12}" y1="${ly}" x2="${plotR + 34}" y2="${ly}" stroke="${s.color}" stroke-width="1.6"${dash}/>`
    );
    parts.push(
      `<text x="${plotR + 40}" y="${ly + 4}" font-size="11">${esc(s.label)}</text>`
    );
    ly += 18;
  }
  ly += 8;
  for (const note of opts.annotations ?? []) {
    parts.push(`<text x="${plotR + 12}" y="${ly}" font-size="11" fill="#444">${esc(note)}</text>`);
    ly += 16;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function cap(x: string, y: string, color: string): string {
  const xl = (Number(x) - 3).toFixed(2);
  const xr = (Number(x) + 3).toFixed(2);
  return `<line x1="${xl}" y1="${y}" x2="${xr}" y2="${y}" stroke="${color}"/>`;
}

function minPositive(values: number[]): number {
  let best = Infinity;
  for (const v of values) if (v > 0 && v < best) best = v;
  return best;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
