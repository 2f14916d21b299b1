import { parseServerMessage } from "./protocol";
import { FrameCell } from "./state";
import { DriverInputMsg, MapConfig } from "./types";

export type ConnectionState = "connecting" | "connected" | "disconnected";

/**
 * One cockpit session: a socket feeding the latest-frame cell and carrying
 * driver inputs back. The UI never touches the simulation except through
 * the input messages sent here.
 */
export class CockpitClient {
  readonly frames = new FrameCell();
  map: MapConfig | null = null;
  state: ConnectionState = "connecting";
  private socket: WebSocket | null = null;

  constructor(private url: string, private now: () => number = () => performance.now()) {}

  connect(): void {
    this.state = "connecting";
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.state = "connected";
    };
    socket.onclose = () => {
      this.state = "disconnected";
      this.socket = null;
    };
    socket.onerror = () => {
      this.state = "disconnected";
    };
    socket.onmessage = (event) => {
      const msg = parseServerMessage(String(event.data));
      if (msg.kind === "frame") this.frames.offer(msg.frame, this.now());
      else if (msg.kind === "config") this.map = msg.config;
    };
  }

  /** Inputs are dropped while disconnected; they must never queue up. */
  sendInput(input: DriverInputMsg): boolean {
    if (this.state !== "connected" || this.socket === null) return false;
    if (this.socket.readyState !== WebSocket.OPEN) return false;
    this.socket.send(JSON.stringify(input));
    return true;
  }

  close(): void {
    this.socket?.close();
  }
}
