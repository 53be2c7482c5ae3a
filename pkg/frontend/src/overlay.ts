import { writeFileSync } from "node:fs";

import { PALETTE, renderChart, Series } from "./svg.js";
import { estimate } from "./stats.js";
import { groupBy, parseResultsCsv } from "./schema.js";
import { PlotSpec, validateSpec } from "./scaling.js";

export function overlaySpec(input: string, output: string): PlotSpec {
  return { input, xField: "n", groupBy: ["mechanism", "K", "epsilon"], referenceSlopes: [], output };
}

export interface OverlayReport {
  file: string;
  cells: number;
  // fraction of (group, n) cells whose bound sits above the empirical mean
  dominatedFraction: number;
}

// Mean empirical risk and the theoretical bound vs n, one curve pair per
// group. The y axis stays linear: Monte Carlo means near zero can dip
// negative, which a log axis cannot represent.
export function plotBoundOverlay(spec: PlotSpec): OverlayReport {
  validateSpec(spec);
  const rows = parseResultsCsv(spec.input);
  const groups = groupBy(rows, (r) =>
    spec.groupBy.map((f) => `${f}=${r[f as keyof typeof r]}`).join(" ")
  );
  const labels = [...groups.keys()].sort();

  const series: Series[] = [];
  let cells = 0;
  let dominated = 0;
  for (const [i, label] of labels.entries()) {
    const color = PALETTE[i % PALETTE.length];
    const byN = groupBy(groups.get(label)!, (r) => String(r.n));
    const ns = [...byN.keys()].map(Number).sort((a, b) => a - b);
    const empirical = ns.map((n) => {
      const cellRows = byN.get(String(n))!;
      const est = estimate(cellRows.map((r) => r.empirical_excess_risk));
      const bound = cellRows[0].theoretical_bound;
      cells += 1;
      if (bound >= est.mean) dominated += 1;
      return { n, est, bound };
    });
    series.push({
      label,
      color,
      points: empirical.map(({ n, est }) => ({
        x: n,
        y: est.mean,
        lo: est.mean - est.stderr,
        hi: est.mean + est.stderr,
      })),
    });
    series.push({
      label: `${label} bound`,
      color,
      dashed: true,
      markers: false,
      points: empirical.map(({ n, bound }) => ({ x: n, y: bound })),
    });
  }

  const dominatedFraction = dominated / cells;
  const svg = renderChart({
    title: "empirical excess risk vs theoretical bound",
    xLabel: "n",
    yLabel: "excess risk",
    xLog: true,
    yLog: false,
    series,
    annotations: [
      `bound above empirical mean in ${dominated}/${cells} cells`,
      `(${(100 * dominatedFraction).toFixed(1)}%)`,
    ],
  });
  writeFileSync(spec.output, svg);
  return { file: spec.output, cells, dominatedFraction };
}
