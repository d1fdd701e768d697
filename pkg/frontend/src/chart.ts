/**
 * chart.ts - per-round AUC chart on a bare canvas.
 *
 * The plotted points are exactly the /metrics round records: x is the
 * labeled count when the round closed, y the AUC. Rounds whose AUC is
 * null (non-binary task or empty eval split) are skipped.
 */

import type { RoundRecord } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export interface ChartSeries {
  val: Point[];
  test: Point[];
}

export function chartSeries(rounds: RoundRecord[]): ChartSeries {
  const pick = (key: "val_auc" | "test_auc"): Point[] =>
    rounds
      .filter((r) => r[key] !== null)
      .map((r) => ({ x: r.labeled_count, y: r[key] as number }));
  return { val: pick("val_auc"), test: pick("test_auc") };
}

/** Map data coordinates onto a pixel rectangle, y axis flipped. */
export function scalePoint(
  p: Point,
  xRange: [number, number],
  yRange: [number, number],
  width: number,
  height: number,
): Point {
  const spanX = xRange[1] - xRange[0] || 1;
  const spanY = yRange[1] - yRange[0] || 1;
  return {
    x: ((p.x - xRange[0]) / spanX) * width,
    y: height - ((p.y - yRange[0]) / spanY) * height,
  };
}

export function xBounds(series: ChartSeries): [number, number] {
  const xs = [...series.val, ...series.test].map((p) => p.x);
  if (xs.length === 0) {
    return [0, 1];
  }
  const lo = Math.min(...xs);
  const hi = Math.max(...xs);
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

const PAD = { left: 42, right: 12, top: 10, bottom: 26 };

export function drawChart(canvas: HTMLCanvasElement, rounds: RoundRecord[]): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    return;
  }
  const series = chartSeries(rounds);
  const width = canvas.width - PAD.left - PAD.right;
  const height = canvas.height - PAD.top - PAD.bottom;
  const xr = xBounds(series);
  const yr: [number, number] = [0.5, 1.0];

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.save();
  ctx.translate(PAD.left, PAD.top);

  ctx.strokeStyle = "#c8c2b8";
  ctx.lineWidth = 1;
  ctx.strokeRect(0, 0, width, height);
  ctx.fillStyle = "#6b6358";
  ctx.font = "11px system-ui, sans-serif";
  for (const tick of [0.5, 0.75, 1.0]) {
    const y = scalePoint({ x: 0, y: tick }, xr, yr, width, height).y;
    ctx.fillText(tick.toFixed(2), -34, y + 4);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.strokeStyle = "#eee8dd";
    ctx.stroke();
  }
  ctx.fillText(String(xr[0]), 0, height + 16);
  ctx.fillText(String(xr[1]), width - 24, height + 16);
  ctx.fillText("labeled", width / 2 - 18, height + 16);

  const drawSeries = (points: Point[], color: string, dashed: boolean) => {
    if (points.length === 0) {
      return;
    }
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = 1.5;
    ctx.setLineDash(dashed ? [5, 4] : []);
    ctx.beginPath();
    points.forEach((p, i) => {
      const s = scalePoint(p, xr, yr, width, height);
      if (i === 0) {
        ctx.moveTo(s.x, s.y);
      } else {
        ctx.lineTo(s.x, s.y);
      }
    });
    ctx.stroke();
    ctx.setLineDash([]);
    for (const p of points) {
      const s = scalePoint(p, xr, yr, width, height);
      ctx.beginPath();
      ctx.arc(s.x, s.y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
  };
  drawSeries(series.val, "#2a6f4e", false);
  drawSeries(series.test, "#8a4f2a", true);
  ctx.restore();
}
