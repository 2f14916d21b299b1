import { CockpitFrame } from "./types";

export const STALE_AFTER_MS = 500;

/**
 * Latest-frame cell decoupling message arrival from the render loop.
 *
 * Frames may be dropped (only the newest matters) but are never reordered:
 * a frame older than the held one is discarded.
 */
export class FrameCell {
  private frame: CockpitFrame | null = null;
  private receivedAtMs: number | null = null;
  framesAccepted = 0;

  offer(frame: CockpitFrame, nowMs: number): boolean {
    if (this.frame !== null && frame.time < this.frame.time) {
      return false; // out of order: keep the newer one
    }
    this.frame = frame;
    this.receivedAtMs = nowMs;
    this.framesAccepted += 1;
    return true;
  }

  latest(): CockpitFrame | null {
    return this.frame;
  }

  /** Stale exactly when no frame has arrived for more than 500 ms. */
  isStale(nowMs: number): boolean {
    if (this.receivedAtMs === null) return true;
    return nowMs - this.receivedAtMs > STALE_AFTER_MS;
  }
}

/** m/s shown to the driver as km/h, rounded to the nearest integer. */
export function speedKmh(speedMs: number): number {
  return Math.round(speedMs * 3.6);
}
