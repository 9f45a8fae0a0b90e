/** Dependency-free SVG chart models: the end-layer sweep (relative metric vs
 * sampling-distance offset) and the live gd loss curve. */

export interface SweepPoint {
  delta: number;
  relative: number;
}

export interface ChartGeometry {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 360, height: 220, pad: 32 };

export interface SweepChartModel {
  series: { metric: string; path: string; points: { x: number; y: number; delta: number }[] }[];
  baseline: { x: number; y: number };  // the delta = 0, relative = 1.0 marker
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
}

function scale(value: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((value - lo) / (hi - lo)) * (outHi - outLo);
}

export function sweepChartModel(
  seriesByMetric: Record<string, SweepPoint[]>,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): SweepChartModel {
  const all = Object.values(seriesByMetric).flat();
  if (all.length === 0) {
    return {
      series: [],
      baseline: { x: geom.width / 2, y: geom.height / 2 },
      xTicks: [],
      yTicks: [],
    };
  }
  const deltas = all.map((p) => p.delta);
  const rels = all.map((p) => p.relative).concat([1.0]);
  const dLo = Math.min(...deltas);
  const dHi = Math.max(...deltas);
  const rLo = Math.min(...rels);
  const rHi = Math.max(...rels);
  const sx = (d: number) => scale(d, dLo, dHi, geom.pad, geom.width - geom.pad);
  const sy = (r: number) => scale(r, rLo, rHi, geom.height - geom.pad, geom.pad);

  const series = Object.entries(seriesByMetric).map(([metric, points]) => {
    const sorted = [...points].sort((a, b) => a.delta - b.delta);
    const mapped = sorted.map((p) => ({ x: sx(p.delta), y: sy(p.relative), delta: p.delta }));
    const path = mapped
      .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
      .join(" ");
    return { metric, path, points: mapped };
  });

  const xTicks = [...new Set(deltas)].sort((a, b) => a - b).map((d) => ({
    x: sx(d),
    label: d > 0 ? `+${d}` : String(d),
  }));
  const yTicks = [rLo, 1.0, rHi].map((r) => ({ y: sy(r), label: r.toFixed(2) }));
  return { series, baseline: { x: sx(0), y: sy(1.0) }, xTicks, yTicks };
}

/** Thin the loss trace to at most maxPoints while keeping first and last. */
export function downsampleTrace(trace: number[], maxPoints: number): { step: number; loss: number }[] {
  if (trace.length <= maxPoints) {
    return trace.map((loss, step) => ({ step, loss }));
  }
  const out: { step: number; loss: number }[] = [];
  const stride = (trace.length - 1) / (maxPoints - 1);
  for (let i = 0; i < maxPoints; i++) {
    const step = Math.round(i * stride);
    out.push({ step, loss: trace[step] });
  }
  return out;
}

export function lossCurvePath(
  points: { step: number; loss: number }[],
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  if (points.length === 0) return "";
  const losses = points.map((p) => p.loss);
  const steps = points.map((p) => p.step);
  const sLo = Math.min(...steps);
  const sHi = Math.max(...steps);
  const lLo = Math.min(...losses);
  const lHi = Math.max(...losses);
  return points
    .map((p, i) => {
      const x = scale(p.step, sLo, sHi, geom.pad, geom.width - geom.pad);
      const y = scale(p.loss, lLo, lHi, geom.height - geom.pad, geom.pad);
      return `${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
