// Canvas <-> image coordinate mapping.
//
// The image is drawn with its top-left at the canvas origin, scaled by the
// zoom factor; image pixel centers sit at integer image coordinates, so the
// center of pixel (x, y) lands at ((x + 0.5) * zoom, (y + 0.5) * zoom) on
// the canvas. The mapping is exact in both directions at any zoom.

export interface Pt {
  x: number;
  y: number;
}

export function imageToCanvas(p: Pt, zoom: number): Pt {
  return { x: (p.x + 0.5) * zoom, y: (p.y + 0.5) * zoom };
}

export function canvasToImage(p: Pt, zoom: number): Pt {
  return { x: p.x / zoom - 0.5, y: p.y / zoom - 0.5 };
}

export function inImageBounds(p: Pt, width: number, height: number): boolean {
  return p.x >= 0 && p.y >= 0 && p.x <= width - 1 && p.y <= height - 1;
}
