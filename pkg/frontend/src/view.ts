import { CockpitFrame, MapConfig } from "./types";

/**
 * World-to-canvas transform: the ego sits at the view anchor, the world is
 * drawn in world axes (no rotation) at a fixed scale so map geometry stays
 * recognizable.
 */
export interface Viewport {
  width: number;
  height: number;
  pxPerMeter: number;
  centerX: number; // world coords the viewport is centered on
  centerY: number;
}

export function viewportFor(
  width: number,
  height: number,
  egoX: number,
  egoY: number,
  pxPerMeter = 6,
): Viewport {
  return { width, height, pxPerMeter, centerX: egoX, centerY: egoY };
}

/** World point -> canvas pixel (y axis flipped: world +y is up). */
export function worldToPixel(vp: Viewport, x: number, y: number): [number, number] {
  const px = vp.width / 2 + (x - vp.centerX) * vp.pxPerMeter;
  const py = vp.height / 2 - (y - vp.centerY) * vp.pxPerMeter;
  return [px, py];
}

export interface GaugeModel {
  speedKmh: number;
  steerDeg: number;
  throttlePct: number;
  brakePct: number;
  mode: string;
  ebStatus: string;
  gapText: string;
  lateralErrorText: string;
  emergencyOverlay: boolean;
}

/** Pure view model: everything the gauges display, derived from one frame. */
export function gaugeModel(
  frame: CockpitFrame,
  throttleAxis: number,
  brakeAxis: number,
): GaugeModel {
  return {
    speedKmh: Math.round(frame.ego.speed * 3.6),
    steerDeg: (frame.ego.steer * 180) / Math.PI,
    throttlePct: Math.round(throttleAxis * 100),
    brakePct: Math.round(brakeAxis * 100),
    mode: frame.mode,
    ebStatus: frame.eb_status,
    gapText: frame.gap === null ? "--" : `${frame.gap.toFixed(1)} m`,
    lateralErrorText: `${(frame.lateral_error * 100).toFixed(1)} cm`,
    emergencyOverlay: frame.mode === "EmergencyStop",
  };
}

export interface Polyline {
  pixels: [number, number][];
  closed: boolean;
}

export function mapPolyline(config: MapConfig, vp: Viewport): Polyline {
  return {
    pixels: config.points.map(([x, y]) => worldToPixel(vp, x, y)),
    closed: config.closed,
  };
}
