export const PROTOCOL_VERSION = 1;

export interface EgoState {
  x: number;
  y: number;
  heading: number;
  speed: number; // m/s
  steer: number; // rad
}

export interface ActorDto {
  id: number;
  kind: string; // "LeadVehicle" | "Pedestrian"
  x: number;
  y: number;
}

export interface CockpitFrame {
  t: "frame";
  v: number;
  time: number;
  ego: EgoState;
  actors: ActorDto[];
  waypoints: [number, number][];
  mode: string;
  eb_status: string;
  gap: number | null;
  lateral_error: number;
}

export interface MapConfig {
  t: "config";
  v: number;
  map_name: string;
  lane_width: number;
  closed: boolean;
  points: [number, number][];
}

export interface DriverInputMsg {
  t: "input";
  steer_axis: number; // [-1, 1]
  throttle_axis: number; // [0, 1]
  brake_axis: number; // [0, 1]
  turn_signal: "Off" | "Left" | "Right" | "Hazard";
  estop: boolean;
  reset: boolean;
}
