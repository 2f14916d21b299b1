import { describe, expect, it } from "vitest";
import { CockpitFrame, MapConfig } from "../src/types";
import { gaugeModel, mapPolyline, viewportFor, worldToPixel } from "../src/view";

function frame(partial: Partial<CockpitFrame["ego"]>, extra: Partial<CockpitFrame> = {}): CockpitFrame {
  return {
    t: "frame", v: 1, time: 0,
    ego: { x: 0, y: 0, heading: 0, speed: 0, steer: 0, ...partial },
    actors: [], waypoints: [], mode: "ManualDrive", eb_status: "Normal",
    gap: null, lateral_error: 0, ...extra,
  };
}

describe("worldToPixel", () => {
  it("centers the viewport on the ego", () => {
    const vp = viewportFor(900, 540, 123.4, -56.7);
    expect(worldToPixel(vp, 123.4, -56.7)).toEqual([450, 270]);
  });

  it("known pose on the straight map lands within one pixel at scale", () => {
    // ego at (50, 0) heading east; a waypoint 10 m ahead at (60, 0)
    const vp = viewportFor(900, 540, 50, 0, 6);
    const [px, py] = worldToPixel(vp, 60, 0);
    expect(Math.abs(px - (450 + 10 * 6))).toBeLessThanOrEqual(1);
    expect(Math.abs(py - 270)).toBeLessThanOrEqual(1);
  });

  it("world +y points up on the canvas", () => {
    const vp = viewportFor(900, 540, 0, 0, 6);
    const [, py] = worldToPixel(vp, 0, 10);
    expect(py).toBeLessThan(270);
  });

  it("round distances are preserved by the scale", () => {
    const vp = viewportFor(800, 600, 0, 0, 5);
    const [ax, ay] = worldToPixel(vp, 3, 4);
    const [bx, by] = worldToPixel(vp, 0, 0);
    const distPx = Math.hypot(ax - bx, ay - by);
    expect(distPx).toBeCloseTo(5 * 5, 9);
  });
});

describe("gaugeModel", () => {
  it("shows 50 km/h for 13.89 m/s", () => {
    const g = gaugeModel(frame({ speed: 13.89 }), 0, 0);
    expect(g.speedKmh).toBe(50);
  });

  it("emergency stop raises the full-screen overlay", () => {
    const g = gaugeModel(frame({}, { mode: "EmergencyStop" } as any), 0, 0);
    expect(g.emergencyOverlay).toBe(true);
  });

  it("formats the gap and lateral error", () => {
    const g = gaugeModel(frame({}, { gap: 17.456, lateral_error: 0.042 } as any), 0.5, 0);
    expect(g.gapText).toBe("17.5 m");
    expect(g.lateralErrorText).toBe("4.2 cm");
    expect(g.throttlePct).toBe(50);
    const none = gaugeModel(frame({}), 0, 0);
    expect(none.gapText).toBe("--");
  });
});

describe("mapPolyline", () => {
  it("transforms every map point and keeps closure", () => {
    const map: MapConfig = {
      t: "config", v: 1, map_name: "oval", lane_width: 3.5, closed: true,
      points: [[0, 0], [10, 0], [10, 10]],
    };
    const vp = viewportFor(100, 100, 0, 0, 2);
    const poly = mapPolyline(map, vp);
    expect(poly.closed).toBe(true);
    expect(poly.pixels).toHaveLength(3);
    expect(poly.pixels[1]).toEqual([70, 50]);
  });
});
