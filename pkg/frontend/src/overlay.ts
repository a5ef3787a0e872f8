// Canvas overlay drawing. Functions accept a minimal 2D-context interface
// so the polyline geometry is testable without a real canvas backend.

import { ContourPolygon, Finding } from './api.js';
import { imageToCanvas, Pt } from './geometry.js';

export interface CanvasCtxLike {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  setLineDash(segments: number[]): void;
  closePath(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function drawPolyline(
  ctx: CanvasCtxLike,
  points: [number, number][],
  zoom: number,
  style: string,
  width = 2,
  dashed = false,
): void {
  if (points.length < 2) {
    return;
  }
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.beginPath();
  const first = imageToCanvas({ x: points[0][0], y: points[0][1] }, zoom);
  ctx.moveTo(first.x, first.y);
  for (let i = 1; i < points.length; i++) {
    const p = imageToCanvas({ x: points[i][0], y: points[i][1] }, zoom);
    ctx.lineTo(p.x, p.y);
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

export function drawContours(
  ctx: CanvasCtxLike,
  polygons: ContourPolygon[],
  zoom: number,
  style = '#00ff6e',
): void {
  for (const poly of polygons) {
    drawPolyline(ctx, poly.points, zoom, style, 1);
  }
}

export function drawMarker(
  ctx: CanvasCtxLike,
  p: Pt,
  zoom: number,
  style: string,
  radius = 5,
): void {
  const c = imageToCanvas(p, zoom);
  ctx.setLineDash([]);
  ctx.fillStyle = style;
  ctx.beginPath();
  ctx.arc(c.x, c.y, radius, 0, 2 * Math.PI);
  ctx.fill();
}

export function drawFindings(
  ctx: CanvasCtxLike,
  findings: Finding[],
  zoom: number,
  style = 'rgba(255, 48, 48, 0.85)',
): void {
  for (const f of findings) {
    const r = (4 + 8 * (1 - f.min_degree)) * zoom * 0.5;
    const c = imageToCanvas({ x: f.location[0], y: f.location[1] }, zoom);
    ctx.setLineDash([]);
    ctx.fillStyle = style;
    ctx.beginPath();
    ctx.arc(c.x, c.y, r, 0, 2 * Math.PI);
    ctx.fill();
  }
}
