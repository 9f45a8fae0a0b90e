import { describe, expect, it } from "vitest";

import { downsampleTrace, lossCurvePath, sweepChartModel, DEFAULT_GEOMETRY } from "../src/charts.js";

describe("sweep chart model", () => {
  const series = {
    cosine: [
      { delta: -1, relative: 0.8 },
      { delta: 0, relative: 1.0 },
      { delta: 1, relative: 1.1 },
    ],
    l1: [
      { delta: -1, relative: 1.4 },
      { delta: 0, relative: 1.0 },
      { delta: 1, relative: 0.9 },
    ],
  };

  it("marks the delta-0 baseline exactly where relative 1.0 plots", () => {
    const model = sweepChartModel(series);
    const cosineZero = model.series
      .find((s) => s.metric === "cosine")!
      .points.find((p) => p.delta === 0)!;
    expect(model.baseline.x).toBeCloseTo(cosineZero.x, 6);
    expect(model.baseline.y).toBeCloseTo(cosineZero.y, 6);
  });

  it("orders points by delta regardless of input order", () => {
    const shuffled = { cosine: [series.cosine[2], series.cosine[0], series.cosine[1]] };
    const model = sweepChartModel(shuffled);
    const deltas = model.series[0].points.map((p) => p.delta);
    expect(deltas).toEqual([-1, 0, 1]);
  });

  it("keeps coordinates inside the padded viewport", () => {
    const model = sweepChartModel(series);
    for (const s of model.series) {
      for (const p of s.points) {
        expect(p.x).toBeGreaterThanOrEqual(DEFAULT_GEOMETRY.pad);
        expect(p.x).toBeLessThanOrEqual(DEFAULT_GEOMETRY.width - DEFAULT_GEOMETRY.pad);
        expect(p.y).toBeGreaterThanOrEqual(DEFAULT_GEOMETRY.pad);
        expect(p.y).toBeLessThanOrEqual(DEFAULT_GEOMETRY.height - DEFAULT_GEOMETRY.pad);
      }
    }
  });

  it("emits one x tick per distinct delta", () => {
    const model = sweepChartModel(series);
    expect(model.xTicks.map((t) => t.label)).toEqual(["-1", "0", "+1"]);
  });

  it("survives empty input", () => {
    const model = sweepChartModel({});
    expect(model.series).toEqual([]);
  });
});

describe("loss curve", () => {
  it("downsampling keeps endpoints and respects the cap", () => {
    const trace = Array.from({ length: 512 }, (_, i) => 1 / (i + 1));
    const points = downsampleTrace(trace, 64);
    expect(points.length).toBe(64);
    expect(points[0]).toEqual({ step: 0, loss: 1 });
    expect(points[points.length - 1].step).toBe(511);
  });

  it("short traces pass through unchanged", () => {
    const points = downsampleTrace([3, 2, 1], 64);
    expect(points).toEqual([
      { step: 0, loss: 3 },
      { step: 1, loss: 2 },
      { step: 2, loss: 1 },
    ]);
  });

  it("path starts with a move command and has one segment per point", () => {
    const path = lossCurvePath([
      { step: 0, loss: 1.0 },
      { step: 1, loss: 0.5 },
      { step: 2, loss: 0.25 },
    ]);
    expect(path.startsWith("M")).toBe(true);
    expect(path.split("L").length).toBe(3);
    expect(lossCurvePath([])).toBe("");
  });
});
