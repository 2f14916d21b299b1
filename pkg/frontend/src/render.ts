import { CockpitFrame, MapConfig } from "./types";
import { GaugeModel, Viewport, mapPolyline, worldToPixel } from "./view";

const LANE_COLOR = "#3a3f4b";
const CENTERLINE_COLOR = "#6b7280";
const WAYPOINT_COLOR = "#2dd4bf";
const EGO_COLOR = "#60a5fa";
const LEAD_COLOR = "#f59e0b";
const PERSON_COLOR = "#ef4444";

export function drawWorld(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  frame: CockpitFrame,
  map: MapConfig | null,
): void {
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, vp.width, vp.height);

  if (map) {
    const lane = mapPolyline(map, vp);
    ctx.lineJoin = "round";
    ctx.strokeStyle = LANE_COLOR;
    ctx.lineWidth = map.lane_width * vp.pxPerMeter;
    tracePath(ctx, lane.pixels, lane.closed);
    ctx.stroke();
    ctx.strokeStyle = CENTERLINE_COLOR;
    ctx.lineWidth = 1;
    ctx.setLineDash([6, 6]);
    tracePath(ctx, lane.pixels, lane.closed);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  ctx.fillStyle = WAYPOINT_COLOR;
  for (const [wx, wy] of frame.waypoints) {
    const [px, py] = worldToPixel(vp, wx, wy);
    ctx.fillRect(px - 1, py - 1, 2, 2);
  }

  for (const actor of frame.actors) {
    const [px, py] = worldToPixel(vp, actor.x, actor.y);
    ctx.fillStyle = actor.kind === "Pedestrian" ? PERSON_COLOR : LEAD_COLOR;
    if (actor.kind === "Pedestrian") {
      ctx.beginPath();
      ctx.arc(px, py, 0.4 * vp.pxPerMeter, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      drawCar(ctx, px, py, 0, vp.pxPerMeter, LEAD_COLOR);
    }
  }

  const [ex, ey] = worldToPixel(vp, frame.ego.x, frame.ego.y);
  drawCar(ctx, ex, ey, -frame.ego.heading, vp.pxPerMeter, EGO_COLOR);
}

function tracePath(
  ctx: CanvasRenderingContext2D,
  pixels: [number, number][],
  closed: boolean,
): void {
  ctx.beginPath();
  pixels.forEach(([px, py], i) => (i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py)));
  if (closed) ctx.closePath();
}

function drawCar(
  ctx: CanvasRenderingContext2D,
  px: number,
  py: number,
  rotation: number,
  pxPerMeter: number,
  color: string,
): void {
  const length = 4.7 * pxPerMeter;
  const width = 1.9 * pxPerMeter;
  ctx.save();
  ctx.translate(px, py);
  ctx.rotate(rotation);
  ctx.fillStyle = color;
  ctx.fillRect(-length / 2, -width / 2, length, width);
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(length / 2 - 3, -width / 2, 3, width); // nose marker
  ctx.restore();
}

export function drawOverlays(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  gauges: GaugeModel,
  stale: boolean,
  connected: boolean,
): void {
  if (gauges.emergencyOverlay) {
    ctx.fillStyle = "rgba(190, 18, 18, 0.35)";
    ctx.fillRect(0, 0, vp.width, vp.height);
    banner(ctx, vp, "EMERGENCY STOP", "#fecaca");
  } else if (!connected) {
    banner(ctx, vp, "DISCONNECTED", "#fcd34d");
  } else if (stale) {
    banner(ctx, vp, "STALE DATA", "#fcd34d");
  }
}

function banner(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  text: string,
  color: string,
): void {
  ctx.fillStyle = "rgba(0, 0, 0, 0.55)";
  ctx.fillRect(0, vp.height / 2 - 28, vp.width, 56);
  ctx.fillStyle = color;
  ctx.font = "bold 28px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(text, vp.width / 2, vp.height / 2);
}
