#!/usr/bin/env node
/**
 * Render residual-vs-epoch figures from vrsplit trace CSVs.
 *
 *   plot --manifest <manifest.json> --out <figure.svg> [--linear]
 *   plot --csv <t1.csv> [<t2.csv> ...] --out <figure.svg> [--linear]
 *
 * Multiple runs sharing one method label are averaged on a common 400-point
 * epoch grid with a shaded min-max band.  The y axis is log-scaled unless
 * --linear is given.  Output is deterministic (no timestamps).
 */

import { writeFileSync } from "node:fs";

import { groupTraces } from "./aggregate.js";
import { renderSvg } from "./svg.js";
import { loadTrace, traceFilesFromManifest, TraceFormatError } from "./trace.js";

export interface Args {
  manifest?: string;
  csv: string[];
  out?: string;
  linear: boolean;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = { csv: [], linear: false };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--manifest") args.manifest = argv[++i];
    else if (a === "--out") args.out = argv[++i];
    else if (a === "--linear") args.linear = true;
    else if (a === "--csv") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        args.csv.push(argv[++i]);
      }
    } else throw new TraceFormatError(`unknown argument ${a}`);
  }
  if (!args.out) throw new TraceFormatError("missing --out <file>");
  if (!args.manifest && args.csv.length === 0) {
    throw new TraceFormatError("need --manifest or --csv inputs");
  }
  return args;
}

export function buildFigure(files: string[], logScale: boolean): string {
  const traces = files.map(loadTrace);
  const series = groupTraces(traces);
  const problem = traces[0].problem;
  return renderSvg(series, { logScale, title: problem });
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    const files = args.manifest ? traceFilesFromManifest(args.manifest) : args.csv;
    const svg = buildFigure(files, !args.linear);
    writeFileSync(args.out!, svg);
  } catch (err) {
    if (err instanceof TraceFormatError || (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
  console.log(args.out);
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
