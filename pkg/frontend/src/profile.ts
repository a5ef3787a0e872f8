// Diameter-profile chart data: polyline layout, stenotic shading, and the
// client-side re-threshold of the per-point degrees. Pure functions; the
// route payload is never mutated.

export interface ChartPoint {
  ordinal: number;
  x: number;
  y: number;
}

export interface ShadedRange {
  a: number; // first ordinal of the run (inclusive)
  b: number; // last ordinal of the run (inclusive)
}

export const MIN_RUN = 2; // single-point dips are noise, same rule as the backend

/** Maximal runs of degree < tau3 (nulls break runs), at least MIN_RUN long. */
export function shadedRanges(degrees: (number | null)[], tau3: number): ShadedRange[] {
  const out: ShadedRange[] = [];
  let start = -1;
  for (let i = 0; i <= degrees.length; i++) {
    const d = i < degrees.length ? degrees[i] : null;
    const flagged = d !== null && d < tau3;
    if (flagged && start < 0) {
      start = i;
    } else if (!flagged && start >= 0) {
      if (i - start >= MIN_RUN) {
        out.push({ a: start, b: i - 1 });
      }
      start = -1;
    }
  }
  return out;
}

export interface ChartLayout {
  points: ChartPoint[]; // measured points only; gaps where diameter is null
  xOf(ordinal: number): number;
  yOf(diameter: number): number;
  dMax: number;
}

export function chartLayout(
  diameters: (number | null)[],
  width: number,
  height: number,
  pad = 24,
): ChartLayout {
  const n = Math.max(diameters.length, 2);
  const measured = diameters.filter((d): d is number => d !== null);
  const dMax = measured.length ? Math.max(...measured) * 1.15 : 1;
  const xOf = (ordinal: number) => pad + (ordinal / (n - 1)) * (width - 2 * pad);
  const yOf = (d: number) => height - pad - (d / dMax) * (height - 2 * pad);
  const points: ChartPoint[] = [];
  diameters.forEach((d, i) => {
    if (d !== null) {
      points.push({ ordinal: i, x: xOf(i), y: yOf(d) });
    }
  });
  return { points, xOf, yOf, dMax };
}

/** Chart ordinal nearest to a chart x position (for hover linking). */
export function nearestOrdinal(layout: ChartLayout, x: number): number | null {
  if (!layout.points.length) {
    return null;
  }
  let best = layout.points[0];
  for (const p of layout.points) {
    if (Math.abs(p.x - x) < Math.abs(best.x - x)) {
      best = p;
    }
  }
  return best.ordinal;
}
