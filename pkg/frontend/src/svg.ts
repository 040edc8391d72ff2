/** Deterministic SVG rendering of residual-vs-epoch series. */

import { Series } from "./aggregate.js";

export interface RenderOptions {
  logScale: boolean;
  width?: number;
  height?: number;
  title?: string;
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
  "#bcbd22",
  "#e377c2",
];

const FLOOR = 1e-300;

function fmt(x: number): string {
  return x.toFixed(2);
}

export function renderSvg(series: Series[], options: RenderOptions): string {
  const width = options.width ?? 760;
  const height = options.height ?? 480;
  const margin = { left: 64, right: 170, top: 28, bottom: 44 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const xMax = Math.max(...series.map((s) => s.epochs[s.epochs.length - 1]), 1e-12);
  const values = series.flatMap((s) => [...s.mean, ...(s.min ?? []), ...(s.max ?? [])]);
  const positive = values.map((v) => Math.max(v, FLOOR));

  let yToPix: (v: number) => number;
  let yTicks: { pix: number; label: string }[];
  if (options.logScale) {
    const lo = Math.floor(Math.log10(Math.min(...positive)));
    const hi = Math.ceil(Math.log10(Math.max(...positive)));
    const span = Math.max(hi - lo, 1);
    yToPix = (v) =>
      margin.top + plotH - ((Math.log10(Math.max(v, FLOOR)) - lo) / span) * plotH;
    yTicks = [];
    for (let d = lo; d <= hi; d++) {
      yTicks.push({ pix: yToPix(10 ** d), label: `1e${d}` });
    }
  } else {
    const hi = Math.max(...positive);
    const lo = Math.min(...positive, 0);
    const span = hi - lo || 1;
    yToPix = (v) => margin.top + plotH - ((v - lo) / span) * plotH;
    yTicks = [0, 0.25, 0.5, 0.75, 1].map((f) => ({
      pix: yToPix(lo + f * span),
      label: (lo + f * span).toPrecision(3),
    }));
  }
  const xToPix = (e: number) => margin.left + (e / xMax) * plotW;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" data-y-scale="${options.logScale ? "log" : "linear"}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (options.title) {
    parts.push(
      `<text x="${margin.left}" y="18" font-family="sans-serif" font-size="13">${options.title}</text>`,
    );
  }

  // axes
  const x0 = margin.left;
  const y0 = margin.top + plotH;
  parts.push(
    `<line x1="${x0}" y1="${margin.top}" x2="${x0}" y2="${y0}" stroke="black"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0 + plotW}" y2="${y0}" stroke="black"/>`,
  );
  for (const tick of yTicks) {
    parts.push(
      `<line x1="${x0 - 4}" y1="${fmt(tick.pix)}" x2="${x0}" y2="${fmt(tick.pix)}" stroke="black"/>`,
      `<text x="${x0 - 8}" y="${fmt(tick.pix + 4)}" text-anchor="end" font-family="sans-serif" ` +
        `font-size="11" class="ytick">${tick.label}</text>`,
    );
  }
  const xTickCount = 5;
  for (let i = 0; i <= xTickCount; i++) {
    const e = (xMax * i) / xTickCount;
    const px = xToPix(e);
    parts.push(
      `<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 4}" stroke="black"/>`,
      `<text x="${fmt(px)}" y="${y0 + 18}" text-anchor="middle" font-family="sans-serif" ` +
        `font-size="11">${Number(e.toPrecision(3))}</text>`,
    );
  }
  parts.push(
    `<text x="${x0 + plotW / 2}" y="${height - 8}" text-anchor="middle" ` +
      `font-family="sans-serif" font-size="12">epochs</text>`,
  );

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (s.min && s.max) {
      const upper = s.epochs.map((e, j) => `${fmt(xToPix(e))},${fmt(yToPix(s.max![j]))}`);
      const lower = [...s.epochs.keys()]
        .reverse()
        .map((j) => `${fmt(xToPix(s.epochs[j]))},${fmt(yToPix(s.min![j]))}`);
      parts.push(
        `<polygon class="band" data-label="${s.label}" fill="${color}" fill-opacity="0.15" ` +
          `stroke="none" points="${upper.join(" ")} ${lower.join(" ")}"/>`,
      );
    }
    const pts = s.epochs.map((e, j) => `${fmt(xToPix(e))},${fmt(yToPix(s.mean[j]))}`);
    parts.push(
      `<polyline class="curve" data-label="${s.label}" data-runs="${s.runs}" ` +
        `data-first="${s.mean[0]}" fill="none" stroke="${color}" stroke-width="1.6" ` +
        `points="${pts.join(" ")}"/>`,
    );
    const ly = margin.top + 16 * i + 8;
    parts.push(
      `<line x1="${width - margin.right + 10}" y1="${ly}" x2="${width - margin.right + 30}" ` +
        `y2="${ly}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${width - margin.right + 36}" y="${ly + 4}" font-family="sans-serif" ` +
        `font-size="11">${s.label}${s.runs > 1 ? ` (${s.runs} runs)` : ""}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
