export interface Estimate {
  mean: number;
  stderr: number;
  count: number;
}

export function estimate(values: number[]): Estimate {
  if (values.length === 0) {
    throw new Error("cannot estimate from zero values");
  }
  const mean = values.reduce((acc, v) => acc + v, 0) / values.length;
  if (values.length === 1) {
    return { mean, stderr: 0, count: 1 };
  }
  const ss = values.reduce((acc, v) => acc + (v - mean) ** 2, 0);
  const sd = Math.sqrt(ss / (values.length - 1));
  return { mean, stderr: sd / Math.sqrt(values.length), count: values.length };
}

// Least-squares slope of ln(y) against ln(x).
export function fitLogLogSlope(xs: number[], ys: number[]): number {
  if (xs.length !== ys.length) {
    throw new Error("x and y lengths differ");
  }
  if (new Set(xs).size < 2) {
    throw new Error("slope fit needs at least two distinct x values");
  }
  for (let i = 0; i < xs.length; i++) {
    if (!(xs[i] > 0) || !(ys[i] > 0)) {
      throw new Error(`slope fit needs positive values, got (${xs[i]}, ${ys[i]})`);
    }
  }
  const lx = xs.map(Math.log);
  const ly = ys.map(Math.log);
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) ** 2;
  }
  return num / den;
}
