// Typed client for the /v1 analysis API.

export interface ContextInfo {
  context_id: string;
  width: number;
  height: number;
  ridge_points: number;
  contours: { polygons: ContourPolygon[] };
}

export interface ContourPolygon {
  outer: boolean;
  points: [number, number][];
}

export interface Finding {
  segment: number;
  range: [number, number];
  location: [number, number];
  min_degree: number;
  mean_degree: number;
}

export interface RouteResult {
  chosen_direction: 'forward' | 'backward';
  degenerate: boolean;
  snapped_start: [number, number];
  snapped_end: [number, number];
  route: [number, number][];
  diameters: (number | null)[];
  mean_diameter: number | null;
  degrees: (number | null)[];
  tau_3: number;
  findings: Finding[];
}

export interface PartialRoutes {
  detail: string;
  partial_routes: Record<string, [number, number][]>;
}

export class UnreachableError extends Error {
  constructor(public payload: PartialRoutes) {
    super(payload.detail);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = '') {}

  async uploadImage(body: Blob | ArrayBuffer): Promise<ContextInfo> {
    const res = await fetch(`${this.baseUrl}/v1/contexts`, {
      method: 'POST',
      body,
      headers: { 'content-type': 'image/png' },
    });
    if (!res.ok) {
      throw new Error(`upload failed: ${res.status} ${await res.text()}`);
    }
    return (await res.json()) as ContextInfo;
  }

  imageUrl(contextId: string): string {
    return `${this.baseUrl}/v1/contexts/${contextId}/image`;
  }

  async requestSegment(
    contextId: string,
    start: [number, number],
    end: [number, number],
  ): Promise<RouteResult> {
    const res = await fetch(`${this.baseUrl}/v1/contexts/${contextId}/segment`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ start, end }),
    });
    if (res.status === 422) {
      throw new UnreachableError((await res.json()) as PartialRoutes);
    }
    if (!res.ok) {
      throw new Error(`segment request failed: ${res.status} ${await res.text()}`);
    }
    return (await res.json()) as RouteResult;
  }
}
