// Single-page wiring: upload, canvas interaction, profile chart, threshold
// slider. Talks to the analysis service exclusively through the /v1 API.

import { ApiClient, RouteResult, UnreachableError } from './api.js';
import { renderProfile } from './chart.js';
import { canvasToImage } from './geometry.js';
import { drawContours, drawFindings, drawMarker, drawPolyline } from './overlay.js';
import { nearestOrdinal } from './profile.js';
import { UiSession } from './session.js';

const ZOOM = 2;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

export function bootstrap(): void {
  const api = new ApiClient('');
  const session = new UiSession();

  const fileInput = el<HTMLInputElement>('file-input');
  const banner = el<HTMLDivElement>('banner');
  const imageCanvas = el<HTMLCanvasElement>('image-canvas');
  const chartCanvas = el<HTMLCanvasElement>('chart-canvas');
  const slider = el<HTMLInputElement>('tau3-slider');
  const sliderLabel = el<HTMLSpanElement>('tau3-value');
  const routeInfo = el<HTMLDivElement>('route-info');
  const toggleContour = el<HTMLInputElement>('toggle-contour');
  const toggleRoute = el<HTMLInputElement>('toggle-centerline');
  const toggleFindings = el<HTMLInputElement>('toggle-findings');

  let backdrop: HTMLImageElement | null = null;
  let partialRoutes: Record<string, [number, number][]> | null = null;
  let highlight: number | null = null;

  function notify(text: string, isError = false): void {
    banner.textContent = text;
    banner.className = isError ? 'banner error' : 'banner';
  }

  function redraw(): void {
    const ctx = imageCanvas.getContext('2d');
    if (!ctx) {
      return;
    }
    ctx.clearRect(0, 0, imageCanvas.width, imageCanvas.height);
    if (backdrop) {
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(backdrop, 0, 0, imageCanvas.width, imageCanvas.height);
    }
    if (session.context && toggleContour.checked) {
      drawContours(ctx, session.context.contours.polygons, ZOOM);
    }
    if (partialRoutes) {
      for (const pts of Object.values(partialRoutes)) {
        drawPolyline(ctx, pts, ZOOM, '#ffb000', 2, true);
      }
    }
    const route = session.lastRoute;
    if (route && toggleRoute.checked) {
      drawPolyline(ctx, route.route, ZOOM, '#00c8ff', 2);
    }
    if (route && toggleFindings.checked) {
      drawFindings(ctx, route.findings, ZOOM);
    }
    if (session.clicks[0]) {
      drawMarker(ctx, session.clicks[0], ZOOM, '#30ff80');
    }
    if (session.clicks[1]) {
      drawMarker(ctx, session.clicks[1], ZOOM, '#ff5050');
    }
    if (route && highlight !== null && route.route[highlight]) {
      const [hx, hy] = route.route[highlight];
      drawMarker(ctx, { x: hx, y: hy }, ZOOM, '#ffb000', 6);
    }
  }

  function redrawChart(): void {
    const route = session.lastRoute;
    const ctx = chartCanvas.getContext('2d');
    if (!ctx) {
      return;
    }
    if (!route) {
      ctx.clearRect(0, 0, chartCanvas.width, chartCanvas.height);
      return;
    }
    renderProfile(ctx, route, session.tau3, chartCanvas.width, chartCanvas.height,
                  highlight);
  }

  function showRoute(route: RouteResult): void {
    const n = route.route.length;
    const mean = route.mean_diameter === null ? 'n/a'
      : route.mean_diameter.toFixed(2);
    routeInfo.textContent =
      `${n} points, ${route.chosen_direction} route, mean diameter ${mean} px, `
      + `${route.findings.length} finding(s)`;
  }

  fileInput.addEventListener('change', async () => {
    const file = fileInput.files?.[0];
    if (!file) {
      return;
    }
    notify('analyzing image…');
    try {
      const info = await api.uploadImage(await file.arrayBuffer());
      session.setContext(info);
      partialRoutes = null;
      highlight = null;
      imageCanvas.width = info.width * ZOOM;
      imageCanvas.height = info.height * ZOOM;
      const img = new Image();
      img.onload = () => {
        backdrop = img;
        redraw();
      };
      img.src = api.imageUrl(info.context_id);
      notify(`ready: ${info.width}x${info.height}, ${info.ridge_points} ridge points. `
        + 'Click a start point.');
      redraw();
      redrawChart();
    } catch (err) {
      notify(String(err), true);
    }
  });

  imageCanvas.addEventListener('click', async (ev: MouseEvent) => {
    const rect = imageCanvas.getBoundingClientRect();
    const p = canvasToImage(
      { x: ev.clientX - rect.left, y: ev.clientY - rect.top }, ZOOM);
    const outcome = session.pickPoint(p);
    partialRoutes = null;
    if (outcome.kind === 'need-upload') {
      notify('upload an angiogram first', true);
      return;
    }
    if (outcome.kind === 'ignored-out-of-bounds') {
      notify('click inside the image', true);
      return;
    }
    if (outcome.kind === 'start-set') {
      highlight = null;
      notify('start set. Click an end point.');
      redraw();
      redrawChart();
      return;
    }
    notify('tracking segment…');
    redraw();
    try {
      const route = await api.requestSegment(
        session.context!.context_id,
        [outcome.start.x, outcome.start.y],
        [outcome.end.x, outcome.end.y]);
      if (session.acceptRoute(outcome.seq, route)) {
        highlight = null;
        showRoute(route);
        notify(route.degenerate
          ? 'start and end snapped to the same point (degenerate route)'
          : 'route ready. A new click starts the next pair.');
        redraw();
        redrawChart();
      }
    } catch (err) {
      if (err instanceof UnreachableError) {
        partialRoutes = err.payload.partial_routes;
        notify('endpoint unreachable; showing partial routes (dashed)', true);
        redraw();
      } else {
        notify(String(err), true);
      }
    }
  });

  slider.addEventListener('input', () => {
    // Pure client-side re-threshold: no network request involved.
    const value = Number(slider.value) / 100;
    session.setTau3(value);
    sliderLabel.textContent = value.toFixed(2);
    redrawChart();
  });

  chartCanvas.addEventListener('mousemove', (ev: MouseEvent) => {
    const route = session.lastRoute;
    if (!route) {
      return;
    }
    const rect = chartCanvas.getBoundingClientRect();
    const layout = renderProfile(
      chartCanvas.getContext('2d')!, route, session.tau3,
      chartCanvas.width, chartCanvas.height, highlight);
    const ord = nearestOrdinal(layout, ev.clientX - rect.left);
    if (ord !== highlight) {
      highlight = ord;
      redraw();
      redrawChart();
    }
  });

  notify('upload an angiogram to begin');
}

if (typeof document !== 'undefined' && document.getElementById('image-canvas')) {
  bootstrap();
}
