import {
  CockpitFrame,
  DriverInputMsg,
  MapConfig,
  PROTOCOL_VERSION,
} from "./types";

/** Clamp a possibly-garbage value into [lo, hi]; NaN and non-numbers go to 0. */
export function clampAxis(value: unknown, lo: number, hi: number): number {
  const v = typeof value === "number" ? value : Number(value);
  if (!Number.isFinite(v)) return 0;
  return Math.min(Math.max(v, lo), hi);
}

/** The input message as it goes on the wire: every axis inside its range. */
export function sanitizeInput(raw: Partial<DriverInputMsg>): DriverInputMsg {
  const signals = ["Off", "Left", "Right", "Hazard"] as const;
  const signal = signals.includes(raw.turn_signal as any)
    ? (raw.turn_signal as DriverInputMsg["turn_signal"])
    : "Off";
  return {
    t: "input",
    steer_axis: clampAxis(raw.steer_axis, -1, 1),
    throttle_axis: clampAxis(raw.throttle_axis, 0, 1),
    brake_axis: clampAxis(raw.brake_axis, 0, 1),
    turn_signal: signal,
    estop: Boolean(raw.estop),
    reset: Boolean(raw.reset),
  };
}

export type ServerMessage =
  | { kind: "frame"; frame: CockpitFrame }
  | { kind: "config"; config: MapConfig }
  | { kind: "ignored" };

/** Parse one server message; unknown or incompatible messages are ignored. */
export function parseServerMessage(data: string): ServerMessage {
  let doc: any;
  try {
    doc = JSON.parse(data);
  } catch {
    return { kind: "ignored" };
  }
  if (typeof doc !== "object" || doc === null) return { kind: "ignored" };
  if (doc.v !== undefined && doc.v !== PROTOCOL_VERSION) return { kind: "ignored" };
  if (doc.t === "frame" && typeof doc.time === "number" && doc.ego) {
    return { kind: "frame", frame: doc as CockpitFrame };
  }
  if (doc.t === "config" && Array.isArray(doc.points)) {
    return { kind: "config", config: doc as MapConfig };
  }
  return { kind: "ignored" };
}
