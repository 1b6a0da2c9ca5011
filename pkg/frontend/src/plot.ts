// Signal plot geometry and canvas rendering.
//
// The geometry maths is separated from the drawing so it can be tested
// headless; the plot itself shows the smoothed projection, the threshold
// line and a cross on every peak (grey when omitted).

import type { ChainReport, SignalSamples } from "./types.js";

export interface PlotPoint {
  x: number;
  y: number;
}

export interface PlotGeometry {
  polyline: PlotPoint[];
  thresholdY: number;
  peaks: Array<PlotPoint & { omitted: boolean }>;
  valueRange: [number, number];
}

const PAD = 8;

export function signalPlotGeometry(
  signal: SignalSamples,
  report: ChainReport | null,
  width: number,
  height: number,
): PlotGeometry {
  const values = signal.values;
  const lo = Math.min(...values, signal.threshold);
  const hi = Math.max(...values, signal.threshold);
  const span = hi - lo || 1;
  const xOf = (i: number) => PAD + (i / Math.max(values.length - 1, 1)) * (width - 2 * PAD);
  const yOf = (v: number) => height - PAD - ((v - lo) / span) * (height - 2 * PAD);
  const polyline = values.map((v, i) => ({ x: xOf(i), y: yOf(v) }));
  const omitted = new Set(report?.omitted_indices ?? []);
  const peaks = (report?.positions_px ?? []).map((p, idx) => {
    const i = Math.round(p - signal.offset0);
    return { x: xOf(i), y: yOf(values[i] ?? lo), omitted: omitted.has(idx) };
  });
  return { polyline, thresholdY: yOf(signal.threshold), peaks, valueRange: [lo, hi] };
}

type Ctx2D = Pick<
  CanvasRenderingContext2D,
  | "clearRect"
  | "beginPath"
  | "moveTo"
  | "lineTo"
  | "stroke"
  | "setLineDash"
> & { strokeStyle: string | CanvasGradient | CanvasPattern; lineWidth: number };

export function drawSignalPlot(ctx: Ctx2D, geometry: PlotGeometry, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);

  ctx.setLineDash([4, 3]);
  ctx.strokeStyle = "#888888";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, geometry.thresholdY);
  ctx.lineTo(width, geometry.thresholdY);
  ctx.stroke();
  ctx.setLineDash([]);

  ctx.strokeStyle = "#1f4e79";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  geometry.polyline.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();

  for (const peak of geometry.peaks) {
    ctx.strokeStyle = peak.omitted ? "#aaaaaa" : "#e8790f";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(peak.x - 4, peak.y - 4);
    ctx.lineTo(peak.x + 4, peak.y + 4);
    ctx.moveTo(peak.x - 4, peak.y + 4);
    ctx.lineTo(peak.x + 4, peak.y - 4);
    ctx.stroke();
  }
}
