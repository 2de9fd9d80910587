// Pure SVG line-chart geometry: one point per projection value, no
// chart library, tiny payload.

export interface ChartPoint {
  x: number;
  y: number;
  year: number;
  value: number;
}

export interface ChartModel {
  width: number;
  height: number;
  points: ChartPoint[];
  path: string;
  yLabels: { y: number; text: string }[];
}

export function buildLineChart(
  series: [number, number][],
  width = 320,
  height = 160,
  pad = 28,
): ChartModel {
  const points: ChartPoint[] = [];
  if (series.length === 0) return { width, height, points, path: "", yLabels: [] };

  const values = series.map(([, v]) => v);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = series.length > 1 ? innerW / (series.length - 1) : 0;

  series.forEach(([year, value], i) => {
    points.push({
      x: pad + step * i,
      y: pad + innerH * (1 - (value - lo) / span),
      year,
      value,
    });
  });
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
    .join(" ");
  const yLabels = [lo, hi].map((v) => ({
    y: pad + innerH * (1 - (v - lo) / span),
    text: formatMoney(v),
  }));
  return { width, height, points, path, yLabels };
}

export function formatMoney(value: number): string {
  if (!Number.isFinite(value)) return "-";
  const rounded = Math.round(value);
  if (Math.abs(rounded) >= 1_000_000)
    return `$${(rounded / 1_000_000).toFixed(1)}M`;
  return `$${rounded.toLocaleString("en-US")}`;
}
