// Click-pair session state: first click sets the start marker, the second
// fires the segment request, a third click resets and starts a new pair.
// Stale responses (superseded by newer clicks) are discarded by sequence
// number. Analysis results are held as-is and never mutated.

import { ContextInfo, RouteResult } from './api.js';
import { inImageBounds, Pt } from './geometry.js';

export type PickOutcome =
  | { kind: 'need-upload' }
  | { kind: 'ignored-out-of-bounds' }
  | { kind: 'start-set'; start: Pt }
  | { kind: 'request'; start: Pt; end: Pt; seq: number };

export interface OverlayToggles {
  contour: boolean;
  centerline: boolean;
  findings: boolean;
}

export class UiSession {
  context: ContextInfo | null = null;
  clicks: Pt[] = [];
  lastRoute: RouteResult | null = null;
  tau3 = 0.8;
  toggles: OverlayToggles = { contour: true, centerline: true, findings: true };
  private seq = 0;

  setContext(info: ContextInfo): void {
    this.context = info;
    this.clicks = [];
    this.lastRoute = null;
    this.tau3 = 0.8;
    this.seq++;
  }

  /** Handle a click in image coordinates. */
  pickPoint(p: Pt): PickOutcome {
    if (!this.context) {
      return { kind: 'need-upload' };
    }
    if (!inImageBounds(p, this.context.width, this.context.height)) {
      return { kind: 'ignored-out-of-bounds' };
    }
    if (this.clicks.length === 0 || this.clicks.length >= 2) {
      this.clicks = [p];
      this.lastRoute = null;
      return { kind: 'start-set', start: p };
    }
    this.clicks.push(p);
    this.seq++;
    return { kind: 'request', start: this.clicks[0], end: p, seq: this.seq };
  }

  /** Accept a response only if no newer request superseded it. */
  acceptRoute(seq: number, route: RouteResult): boolean {
    if (seq !== this.seq) {
      return false;
    }
    this.lastRoute = route;
    return true;
  }

  setTau3(value: number): void {
    if (!(value > 0 && value < 1)) {
      throw new RangeError(`tau3 must lie in (0, 1), got ${value}`);
    }
    this.tau3 = value;
  }

  currentSeq(): number {
    return this.seq;
  }
}
