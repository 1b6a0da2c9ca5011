import { describe, expect, it } from "vitest";

import { signalPlotGeometry } from "../src/plot.js";
import type { ChainReport, SignalSamples } from "../src/types.js";

const signal: SignalSamples = {
  values: [0, 1, 0, 3, 0, 1, 0],
  threshold: 1.5,
  offset0: 0,
};

const report = {
  positions_px: [3],
  omitted_indices: [],
} as unknown as ChainReport;

describe("signal plot geometry", () => {
  it("maps the value range onto the canvas with padding", () => {
    const g = signalPlotGeometry(signal, report, 100, 50);
    expect(g.polyline).toHaveLength(7);
    expect(g.valueRange).toEqual([0, 3]);
    const ys = g.polyline.map((p) => p.y);
    // the maximum sample touches the top padding, the minimum the bottom
    expect(Math.min(...ys)).toBeCloseTo(8);
    expect(Math.max(...ys)).toBeCloseTo(42);
  });

  it("places the threshold line between the extremes", () => {
    const g = signalPlotGeometry(signal, report, 100, 50);
    expect(g.thresholdY).toBeGreaterThan(8);
    expect(g.thresholdY).toBeLessThan(42);
  });

  it("marks peaks at their sample positions and flags omissions", () => {
    const g = signalPlotGeometry(signal, report, 100, 50);
    expect(g.peaks).toHaveLength(1);
    expect(g.peaks[0].omitted).toBe(false);
    const omitted = signalPlotGeometry(
      signal,
      { ...report, omitted_indices: [0] } as unknown as ChainReport,
      100,
      50,
    );
    expect(omitted.peaks[0].omitted).toBe(true);
  });

  it("handles offset-based signals", () => {
    const offsetSignal = { ...signal, offset0: -3 };
    const g = signalPlotGeometry(offsetSignal, {
      positions_px: [0],
      omitted_indices: [],
    } as unknown as ChainReport, 100, 50);
    // position 0 with offset0 -3 is sample index 3, the tallest sample
    expect(g.peaks[0].y).toBeCloseTo(8);
  });

  it("survives a flat signal", () => {
    const flat = { values: [1, 1, 1], threshold: 1, offset0: 0 };
    const g = signalPlotGeometry(flat, null, 100, 50);
    expect(g.polyline.every((p) => Number.isFinite(p.y))).toBe(true);
    expect(g.peaks).toHaveLength(0);
  });
});
