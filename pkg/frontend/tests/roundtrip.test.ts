// UI round-trip: upload a branching phantom, click the stem and an arm tip,
// receive and render the tracked route, and verify the rendered polyline
// matches the payload under 2x zoom; the threshold slider re-shades the
// profile without touching the network. Service responses are the captured
// payloads of the real analysis service for the same phantom and clicks.

import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import contextFixture from './fixtures/context_y60.json';
import routeFixture from './fixtures/route_y60.json';
import routeSten from './fixtures/route_sten60.json';
import type { ContextInfo, RouteResult } from '../src/api.js';
import { renderProfile } from '../src/chart.js';
import { imageToCanvas } from '../src/geometry.js';
import { drawPolyline } from '../src/overlay.js';
import { bootstrap } from '../src/main.js';

const ZOOM = 2;
const context = contextFixture as unknown as ContextInfo;
const route = routeFixture as unknown as RouteResult;

class RecordingCtx {
  ops: { op: string; x?: number; y?: number }[] = [];
  strokeStyle: string = '';
  fillStyle: string = '';
  lineWidth = 1;
  beginPath() { this.ops.push({ op: 'begin' }); }
  moveTo(x: number, y: number) { this.ops.push({ op: 'move', x, y }); }
  lineTo(x: number, y: number) { this.ops.push({ op: 'line', x, y }); }
  stroke() { this.ops.push({ op: 'stroke' }); }
  fill() { this.ops.push({ op: 'fill' }); }
  arc(x: number, y: number) { this.ops.push({ op: 'arc', x, y }); }
  setLineDash() {}
  closePath() {}
  clearRect() { this.ops.push({ op: 'clear' }); }
  fillRect(x: number, _y: number, w: number) {
    this.ops.push({ op: 'rect', x, y: w });
  }
  vertices(): { x: number; y: number }[] {
    return this.ops.filter((o) => o.op === 'move' || o.op === 'line')
      .map((o) => ({ x: o.x!, y: o.y! }));
  }
}

function setupDom(): void {
  document.body.innerHTML = `
    <input type="file" id="file-input">
    <div id="banner"></div>
    <div id="route-info"></div>
    <canvas id="image-canvas" width="800" height="800"></canvas>
    <canvas id="chart-canvas" width="640" height="320"></canvas>
    <input type="range" id="tau3-slider" min="5" max="95" value="80">
    <span id="tau3-value">0.80</span>
    <input type="checkbox" id="toggle-contour" checked>
    <input type="checkbox" id="toggle-centerline" checked>
    <input type="checkbox" id="toggle-findings" checked>
  `;
  // jsdom has no 2D canvas backend; drawing is covered by the recording
  // context tests below.
  (HTMLCanvasElement.prototype as any).getContext = () => null;
}

function fetchRouter() {
  return vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
    const path = String(url);
    if (path.endsWith('/v1/contexts') && init?.method === 'POST') {
      return new Response(JSON.stringify(context), { status: 200 });
    }
    if (path.includes('/segment')) {
      return new Response(JSON.stringify(route), { status: 200 });
    }
    throw new Error(`unexpected fetch ${path}`);
  });
}

describe('UI round-trip on the branching phantom', () => {
  let fetchMock: ReturnType<typeof fetchRouter>;

  beforeEach(() => {
    setupDom();
    fetchMock = fetchRouter();
    vi.stubGlobal('fetch', fetchMock);
    bootstrap();
  });

  afterEach(() => {
    vi.unstubAllGlobals();
  });

  async function uploadAndClick(): Promise<void> {
    const input = document.getElementById('file-input') as HTMLInputElement;
    const bytes = new Uint8Array([137, 80, 78, 71]);
    const file = new File([bytes], 'y.png', { type: 'image/png' });
    if (typeof file.arrayBuffer !== 'function') {
      // jsdom's File misses arrayBuffer(); give it the standard behavior.
      (file as any).arrayBuffer = async () => bytes.buffer;
    }
    Object.defineProperty(input, 'files', { value: [file] });
    input.dispatchEvent(new Event('change'));
    await vi.waitFor(() => {
      expect(document.getElementById('banner')!.textContent).toContain('ready');
    });

    const canvas = document.getElementById('image-canvas') as HTMLCanvasElement;
    const clicks: [number, number][] = [[55, 200], [328.56, 120]];
    for (const [ix, iy] of clicks) {
      const c = imageToCanvas({ x: ix, y: iy }, ZOOM);
      canvas.dispatchEvent(new MouseEvent('click', {
        clientX: c.x, clientY: c.y, bubbles: true,
      }));
    }
    await vi.waitFor(() => {
      expect(document.getElementById('route-info')!.textContent).toContain('points');
    });
  }

  it('uploads, clicks stem and arm tip, and receives the route', async () => {
    await uploadAndClick();

    // The segment request carried the image coordinates of the clicks
    // (canvas -> image mapping exact within 0.5 px at 2x zoom).
    const segmentCall = fetchMock.mock.calls.find(
      ([u]) => String(u).includes('/segment'));
    expect(segmentCall).toBeDefined();
    const body = JSON.parse(String(segmentCall![1]!.body));
    expect(Math.abs(body.start[0] - 55)).toBeLessThan(0.5);
    expect(Math.abs(body.start[1] - 200)).toBeLessThan(0.5);
    expect(Math.abs(body.end[0] - 328.56)).toBeLessThan(0.5);
    expect(Math.abs(body.end[1] - 120)).toBeLessThan(0.5);

    const info = document.getElementById('route-info')!.textContent!;
    expect(info).toContain(`${route.route.length} points`);
  });

  it('renders the route polyline within 0.5 px of the payload at 2x zoom', () => {
    const ctx = new RecordingCtx();
    drawPolyline(ctx, route.route, ZOOM, '#00c8ff');
    const drawn = ctx.vertices();
    expect(drawn).toHaveLength(route.route.length);
    route.route.forEach(([x, y], i) => {
      const expected = imageToCanvas({ x, y }, ZOOM);
      expect(Math.abs(drawn[i].x - expected.x)).toBeLessThan(0.5);
      expect(Math.abs(drawn[i].y - expected.y)).toBeLessThan(0.5);
    });
  });

  it('slider re-shades the chart without any network request', async () => {
    await uploadAndClick();
    const before = fetchMock.mock.calls.length;

    const slider = document.getElementById('tau3-slider') as HTMLInputElement;
    slider.value = '50';
    slider.dispatchEvent(new Event('input'));
    expect(document.getElementById('tau3-value')!.textContent).toBe('0.50');
    expect(fetchMock.mock.calls.length).toBe(before);

    // The re-shade itself is a pure recomputation from the degrees array:
    // rendering the stenosed fixture at two thresholds changes the shading
    // rectangles, still without any fetch.
    const sten = routeSten as unknown as RouteResult;
    const ctxA = new RecordingCtx();
    renderProfile(ctxA as any, sten, 0.8, 640, 320);
    const ctxB = new RecordingCtx();
    renderProfile(ctxB as any, sten, 0.3, 640, 320);
    const rectsA = ctxA.ops.filter((o) => o.op === 'rect');
    const rectsB = ctxB.ops.filter((o) => o.op === 'rect');
    expect(rectsA.length).toBeGreaterThan(0);
    expect(rectsB.length).toBe(0); // nothing falls below tau3 = 0.3
    expect(fetchMock.mock.calls.length).toBe(before);
  });
});
