import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";

const SCALING = fileURLToPath(new URL("./fixtures/scaling.csv", import.meta.url));
const OVERLAY = fileURLToPath(new URL("./fixtures/overlay.csv", import.meta.url));

let stdout: string[];
let stderr: string[];

beforeEach(() => {
  stdout = [];
  stderr = [];
  vi.spyOn(process.stdout, "write").mockImplementation((chunk) => {
    stdout.push(String(chunk));
    return true;
  });
  vi.spyOn(process.stderr, "write").mockImplementation((chunk) => {
    stderr.push(String(chunk));
    return true;
  });
});

afterEach(() => {
  vi.restoreAllMocks();
});

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "cli-"));
}

describe("plot CLI", () => {
  it("scaling writes the figure and prints the fits", () => {
    const out = join(tmp(), "s.svg");
    expect(main(["scaling", "--in", SCALING, "--out", out])).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(stdout.join("")).toContain("bernoulli-subset 0.495");
  });

  it("bound-overlay writes the figure and prints the coverage", () => {
    const out = join(tmp(), "o.svg");
    expect(main(["bound-overlay", "--in", OVERLAY, "--out", out])).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(stdout.join("")).toContain("100.0% of 24 cells");
  });

  it("usage errors exit 2", () => {
    expect(main([])).toBe(2);
    expect(main(["resize", "--in", SCALING, "--out", "x.svg"])).toBe(2);
    expect(main(["scaling", "--in", SCALING])).toBe(2);
    expect(main(["scaling", "--wat", "x"])).toBe(2);
    expect(stderr.join("")).toContain("usage:");
  });

  it("schema mismatch exits 1 and writes nothing", () => {
    const dir = tmp();
    const csv = join(dir, "bad.csv");
    writeFileSync(csv, "a,b\n1,2\n");
    const out = join(dir, "bad.svg");
    expect(main(["scaling", "--in", csv, "--out", out])).toBe(1);
    expect(existsSync(out)).toBe(false);
    expect(stderr.join("")).toContain("header mismatch");
  });

  it("missing input file exits 1", () => {
    expect(main(["scaling", "--in", "/nonexistent.csv", "--out", join(tmp(), "x.svg")])).toBe(1);
    expect(stderr.join("")).toContain("error:");
  });
});
