import { writeFileSync } from "node:fs";

import { PALETTE, renderChart, Series } from "./svg.js";
import { estimate, fitLogLogSlope } from "./stats.js";
import { groupBy, parseResultsCsv, ResultRow, RESULT_COLUMNS, SchemaError } from "./schema.js";

export interface PlotSpec {
  input: string;
  xField: string;
  groupBy: string[];
  referenceSlopes: number[];
  output: string;
}

export class PlotError extends Error {}

export function scalingSpec(input: string, output: string): PlotSpec {
  return { input, xField: "K", groupBy: ["mechanism"], referenceSlopes: [0.5, 1.0], output };
}

export function validateSpec(spec: PlotSpec): void {
  const known = new Set<string>(RESULT_COLUMNS);
  for (const field of [spec.xField, ...spec.groupBy]) {
    if (!known.has(field)) {
      throw new SchemaError(`field ${JSON.stringify(field)} is not a CSV column`);
    }
  }
  if (!spec.output.endsWith(".svg")) {
    throw new PlotError(`output must be an .svg path, got ${spec.output}`);
  }
}

export interface ScalingSlice {
  epsilon: number;
  n: number;
  file: string;
  // least-squares log-log slope of mean risk vs the x field, per group
  fits: Record<string, number>;
}

function fieldValue(row: ResultRow, field: string): number | string {
  return row[field as keyof ResultRow] as number | string;
}

function sliceName(output: string, epsilon: number, n: number): string {
  return output.replace(/\.svg$/, `_eps${epsilon}_n${n}.svg`);
}

// One figure per (epsilon, n) slice: mean risk +- stderr vs K per group on
// log-log axes, with reference slope guides anchored at the smallest K.
export function plotScaling(spec: PlotSpec): ScalingSlice[] {
  validateSpec(spec);
  const rows = parseResultsCsv(spec.input);
  const slices = groupBy(rows, (r) => `${r.epsilon}|${r.n}`);
  const multi = slices.size > 1;
  const out: ScalingSlice[] = [];

  for (const sliceRows of slices.values()) {
    const { epsilon, n } = sliceRows[0];
    const groups = groupBy(sliceRows, (r) => spec.groupBy.map((f) => fieldValue(r, f)).join(" "));
    const labels = [...groups.keys()].sort();

    const series: Series[] = [];
    const fits: Record<string, number> = {};
    const anchorMeans: number[] = [];
    let anchorX = Infinity;

    for (const [i, label] of labels.entries()) {
      const byX = groupBy(groups.get(label)!, (r) => String(fieldValue(r, spec.xField)));
      const xs = [...byX.keys()].map(Number).sort((a, b) => a - b);
      if (xs.length < 2) {
        throw new PlotError(
          `group ${JSON.stringify(label)} has ${xs.length} distinct ${spec.xField} value(s); nothing to fit`
        );
      }
      const points = xs.map((x) => {
        const est = estimate(byX.get(String(x))!.map((r) => r.closed_form_risk));
        return { x, y: est.mean, lo: est.mean - est.stderr, hi: est.mean + est.stderr };
      });
      fits[label] = fitLogLogSlope(points.map((p) => p.x), points.map((p) => p.y));
      series.push({ label, color: PALETTE[i % PALETTE.length], points });
      anchorX = Math.min(anchorX, points[0].x);
      anchorMeans.push(points[0].y);
    }

    const anchorY = anchorMeans.reduce((a, b) => a + b, 0) / anchorMeans.length;
    const allX = [...new Set(series.flatMap((s) => s.points.map((p) => p.x)))].sort((a, b) => a - b);
    for (const slope of spec.referenceSlopes) {
      series.push({
        label: `slope ${slope} guide`,
        color: "#999999",
        dashed: true,
        markers: false,
        points: allX.map((x) => ({ x, y: anchorY * (x / anchorX) ** slope })),
      });
    }

    const file = multi ? sliceName(spec.output, epsilon, n) : spec.output;
    const svg = renderChart({
      title: `mean excess risk vs ${spec.xField} (epsilon=${epsilon}, n=${n})`,
      xLabel: spec.xField,
      yLabel: "mean excess risk",
      xLog: true,
      yLog: true,
      series,
      xTicks: allX,
      annotations: labels.map((l) => `${l}: fit slope ${fits[l].toFixed(3)}`),
    });
    writeFileSync(file, svg);
    out.push({ epsilon, n, file, fits });
  }
  return out;
}
