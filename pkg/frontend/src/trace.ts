/** Trace CSV loading with strict schema validation. */

import { readFileSync } from "node:fs";

export const TRACE_HEADER = [
  "method",
  "estimator",
  "problem",
  "seed",
  "oracle_units",
  "epochs",
  "rel_residual",
  "wall_ms",
] as const;

export interface Trace {
  file: string;
  method: string;
  estimator: string;
  problem: string;
  seed: string;
  epochs: number[];
  relResidual: number[];
}

export class TraceFormatError extends Error {}

const NUMERIC_COLUMNS = ["oracle_units", "epochs", "rel_residual", "wall_ms"] as const;

export function parseTraceCsv(text: string, file: string): Trace {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new TraceFormatError(`${file}: empty file, expected a header row`);
  }
  const header = lines[0].split(",");
  for (let i = 0; i < TRACE_HEADER.length; i++) {
    if (header[i] !== TRACE_HEADER[i]) {
      throw new TraceFormatError(
        `${file}: column ${i + 1} is ${JSON.stringify(header[i])}, expected "${TRACE_HEADER[i]}"`,
      );
    }
  }
  if (header.length !== TRACE_HEADER.length) {
    throw new TraceFormatError(`${file}: expected ${TRACE_HEADER.length} columns, got ${header.length}`);
  }
  const trace: Trace = {
    file,
    method: "",
    estimator: "",
    problem: "",
    seed: "",
    epochs: [],
    relResidual: [],
  };
  for (let row = 1; row < lines.length; row++) {
    const fields = lines[row].split(",");
    if (fields.length !== TRACE_HEADER.length) {
      throw new TraceFormatError(`${file}: row ${row + 1} has ${fields.length} fields`);
    }
    if (row === 1) {
      [trace.method, trace.estimator, trace.problem, trace.seed] = fields;
    }
    for (const name of NUMERIC_COLUMNS) {
      const value = Number(fields[TRACE_HEADER.indexOf(name)]);
      if (!Number.isFinite(value)) {
        throw new TraceFormatError(`${file}: column ${name}, row ${row + 1}: not a finite number`);
      }
    }
    trace.epochs.push(Number(fields[5]));
    trace.relResidual.push(Number(fields[6]));
  }
  return trace;
}

export function loadTrace(path: string): Trace {
  return parseTraceCsv(readFileSync(path, "utf8"), path);
}

export interface Manifest {
  outputs: { file: string }[];
}

export function traceFilesFromManifest(manifestPath: string): string[] {
  const manifest = JSON.parse(readFileSync(manifestPath, "utf8")) as Manifest;
  if (!Array.isArray(manifest.outputs)) {
    throw new TraceFormatError(`${manifestPath}: no "outputs" array`);
  }
  const dir = manifestPath.replace(/[^/\\]+$/, "");
  return manifest.outputs.map((entry) => dir + entry.file);
}
