#!/usr/bin/env node
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { SchemaError } from "./schema.js";
import { PlotError, plotScaling, scalingSpec } from "./scaling.js";
import { overlaySpec, plotBoundOverlay } from "./overlay.js";

const USAGE = `usage: plot <scaling|bound-overlay> --in <csv> --out <svg>

  scaling        mean risk vs K per mechanism, log-log, with slope guides;
                 one file per (epsilon, n) slice in the CSV
  bound-overlay  empirical risk and theoretical bound vs n per cell
`;

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "scaling" && command !== "bound-overlay") {
    process.stderr.write(USAGE);
    return 2;
  }
  let flags: { in?: string; out?: string };
  try {
    flags = parseArgs({
      args: rest,
      options: { in: { type: "string" }, out: { type: "string" } },
    }).values;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  if (!flags.in || !flags.out) {
    process.stderr.write(`--in and --out are required\n${USAGE}`);
    return 2;
  }

  try {
    if (command === "scaling") {
      for (const slice of plotScaling(scalingSpec(flags.in, flags.out))) {
        const fits = Object.entries(slice.fits)
          .map(([label, slope]) => `${label} ${slope.toFixed(3)}`)
          .join(", ");
        process.stdout.write(`wrote ${slice.file} (fits: ${fits})\n`);
      }
    } else {
      const report = plotBoundOverlay(overlaySpec(flags.in, flags.out));
      process.stdout.write(
        `wrote ${report.file} (bound above empirical mean in ` +
          `${(100 * report.dominatedFraction).toFixed(1)}% of ${report.cells} cells)\n`
      );
    }
  } catch (err) {
    if (err instanceof SchemaError || err instanceof PlotError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    if (err instanceof Error && (err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
