import { readFileSync } from "node:fs";
import Papa from "papaparse";

// The benchmark CSV contract. Header must match exactly, in this order.
export const RESULT_COLUMNS = [
  "mechanism",
  "K",
  "epsilon",
  "n",
  "d",
  "trial",
  "seed",
  "empirical_excess_risk",
  "closed_form_risk",
  "theoretical_bound",
  "wall_time_ms",
] as const;

export type ResultColumn = (typeof RESULT_COLUMNS)[number];

export interface ResultRow {
  mechanism: string;
  K: number;
  epsilon: number;
  n: number;
  d: number | null;
  trial: number;
  seed: string; // 64-bit; wider than Number.MAX_SAFE_INTEGER, kept verbatim
  empirical_excess_risk: number;
  closed_form_risk: number;
  theoretical_bound: number;
  wall_time_ms: number;
}

export class SchemaError extends Error {}

export function parseResultsCsv(path: string): ResultRow[] {
  return parseResultsText(readFileSync(path, "utf8"), path);
}

export function parseResultsText(text: string, source = "<csv>"): ResultRow[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`${source}: ${e.message} (row ${e.row ?? "?"})`);
  }
  const fields = parsed.meta.fields ?? [];
  if (fields.join(",") !== RESULT_COLUMNS.join(",")) {
    throw new SchemaError(
      `${source}: header mismatch\n  expected: ${RESULT_COLUMNS.join(",")}\n  got:      ${fields.join(",")}`
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${source}: no data rows`);
  }
  return parsed.data.map((raw, i) => toRow(raw, `${source} row ${i + 2}`));
}

function toRow(raw: Record<string, string>, where: string): ResultRow {
  const num = (field: ResultColumn): number => {
    const v = Number(raw[field]);
    if (raw[field] === "" || !Number.isFinite(v)) {
      throw new SchemaError(`${where}: ${field} is not a finite number: ${JSON.stringify(raw[field])}`);
    }
    return v;
  };
  const int = (field: ResultColumn): number => {
    const v = num(field);
    if (!Number.isInteger(v)) {
      throw new SchemaError(`${where}: ${field} is not an integer: ${raw[field]}`);
    }
    return v;
  };
  if (!raw.mechanism) {
    throw new SchemaError(`${where}: empty mechanism`);
  }
  if (!/^\d+$/.test(raw.seed)) {
    throw new SchemaError(`${where}: seed is not an unsigned integer: ${JSON.stringify(raw.seed)}`);
  }
  return {
    mechanism: raw.mechanism,
    K: int("K"),
    epsilon: num("epsilon"),
    n: int("n"),
    d: raw.d === "" ? null : int("d"),
    trial: int("trial"),
    seed: raw.seed,
    empirical_excess_risk: num("empirical_excess_risk"),
    closed_form_risk: num("closed_form_risk"),
    theoretical_bound: num("theoretical_bound"),
    wall_time_ms: num("wall_time_ms"),
  };
}

export function groupBy<T>(items: T[], key: (item: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const item of items) {
    const k = key(item);
    const bucket = out.get(k);
    if (bucket) {
      bucket.push(item);
    } else {
      out.set(k, [item]);
    }
  }
  return out;
}
