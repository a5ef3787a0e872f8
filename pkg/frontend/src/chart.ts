// Diameter profile chart rendering onto a 2D context, with stenotic-range
// shading recomputed client-side from the degrees array.

import { RouteResult } from './api.js';
import { CanvasCtxLike } from './overlay.js';
import { chartLayout, ChartLayout, shadedRanges } from './profile.js';

export interface ChartCtxLike extends CanvasCtxLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
}

export function renderProfile(
  ctx: ChartCtxLike,
  route: RouteResult,
  tau3: number,
  width: number,
  height: number,
  highlightOrdinal: number | null = null,
): ChartLayout {
  ctx.clearRect(0, 0, width, height);
  const layout = chartLayout(route.diameters, width, height);

  // Shade stenotic ordinal ranges (pure re-threshold of the degrees).
  ctx.fillStyle = 'rgba(255, 80, 80, 0.25)';
  for (const r of shadedRanges(route.degrees, tau3)) {
    const x0 = layout.xOf(r.a);
    const x1 = layout.xOf(r.b);
    ctx.fillRect(x0, 0, x1 - x0, height);
  }

  // Mean-diameter reference line.
  if (route.mean_diameter !== null) {
    ctx.strokeStyle = '#888888';
    ctx.lineWidth = 1;
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    const y = layout.yOf(route.mean_diameter);
    ctx.moveTo(layout.xOf(0), y);
    ctx.lineTo(layout.xOf(route.diameters.length - 1), y);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  // Diameter polyline with gaps at unmeasured points.
  ctx.strokeStyle = '#00a0e0';
  ctx.lineWidth = 2;
  ctx.beginPath();
  let pen = false;
  route.diameters.forEach((d, i) => {
    if (d === null) {
      pen = false;
      return;
    }
    const x = layout.xOf(i);
    const y = layout.yOf(d);
    if (pen) {
      ctx.lineTo(x, y);
    } else {
      ctx.moveTo(x, y);
      pen = true;
    }
  });
  ctx.stroke();

  if (highlightOrdinal !== null) {
    const d = route.diameters[highlightOrdinal];
    if (d !== null && d !== undefined) {
      ctx.fillStyle = '#ffb000';
      ctx.beginPath();
      ctx.arc(layout.xOf(highlightOrdinal), layout.yOf(d), 4, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  return layout;
}
