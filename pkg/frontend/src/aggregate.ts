/** Grouping of traces by method label and aggregation onto a common grid. */

import { Trace, TraceFormatError } from "./trace.js";

export interface Series {
  label: string;
  /** Epoch coordinates, either raw (single trace) or the shared grid. */
  epochs: number[];
  mean: number[];
  min?: number[];
  max?: number[];
  runs: number;
}

export const GRID_POINTS = 400;

export function labelOf(trace: Trace): string {
  return trace.estimator ? `${trace.method}-${trace.estimator}` : trace.method;
}

function interpolate(xs: number[], ys: number[], x: number): number {
  if (x <= xs[0]) return ys[0];
  const last = xs.length - 1;
  if (x >= xs[last]) return ys[last];
  let lo = 0;
  let hi = last;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (xs[mid] <= x) lo = mid;
    else hi = mid;
  }
  const t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

/** Mean (and min-max band) of several runs on a 400-point epoch grid. */
export function aggregate(traces: Trace[]): Series {
  const label = labelOf(traces[0]);
  if (traces.length === 1) {
    const t = traces[0];
    return { label, epochs: [...t.epochs], mean: [...t.relResidual], runs: 1 };
  }
  const end = Math.min(...traces.map((t) => t.epochs[t.epochs.length - 1]));
  const grid: number[] = [];
  for (let i = 0; i < GRID_POINTS; i++) {
    grid.push((end * i) / (GRID_POINTS - 1));
  }
  const mean = new Array<number>(GRID_POINTS).fill(0);
  const min = new Array<number>(GRID_POINTS).fill(Infinity);
  const max = new Array<number>(GRID_POINTS).fill(-Infinity);
  for (const t of traces) {
    grid.forEach((x, i) => {
      const y = interpolate(t.epochs, t.relResidual, x);
      mean[i] += y / traces.length;
      min[i] = Math.min(min[i], y);
      max[i] = Math.max(max[i], y);
    });
  }
  return { label, epochs: grid, mean, min, max, runs: traces.length };
}

/** Group traces by label; every trace must describe the same problem. */
export function groupTraces(traces: Trace[]): Series[] {
  if (traces.length === 0) {
    throw new TraceFormatError("no traces to plot");
  }
  const problems = new Set(traces.map((t) => t.problem));
  if (problems.size > 1) {
    throw new TraceFormatError(
      `mixed problem tags in one figure: ${[...problems].sort().join(", ")}`,
    );
  }
  const groups = new Map<string, Trace[]>();
  for (const t of traces) {
    const key = labelOf(t);
    const bucket = groups.get(key);
    if (bucket) bucket.push(t);
    else groups.set(key, [t]);
  }
  return [...groups.entries()].sort(([a], [b]) => a.localeCompare(b)).map(([, ts]) => aggregate(ts));
}
