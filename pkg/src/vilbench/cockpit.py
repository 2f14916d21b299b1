"""WebSocket cockpit channel: stream world frames out, take driver input in.

The simulation publishes decimated frames ("t":"frame") and consumes
clamped driver inputs ("t":"input"); the browser client never mutates the
world except through these input messages.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from typing import Optional

from .command import ControlCommand, TurnSignal
from .geometry import WaypointPath
from .scenario import ScenarioConfig
from .worldcore import WorldState

PROTOCOL_VERSION = 1
COCKPIT_PATH = "/cockpit"
FRAME_PERIOD = 0.050  # s; decimate the 50 Hz tick stream to ~20 Hz


def _clamp(v: float, lo: float, hi: float) -> float:
    try:
        v = float(v)
    except (TypeError, ValueError):
        return 0.0
    if not math.isfinite(v):
        return 0.0
    return min(max(v, lo), hi)


@dataclass(frozen=True)
class DriverInput:
    steer_axis: float = 0.0     # [-1, 1]
    throttle_axis: float = 0.0  # [0, 1]
    brake_axis: float = 0.0     # [0, 1]
    turn_signal: TurnSignal = TurnSignal.OFF
    estop: bool = False
    reset: bool = False

    @classmethod
    def from_json(cls, doc: dict) -> "DriverInput":
        """Server-side re-validation: every axis is clamped to its range."""
        try:
            signal = TurnSignal(doc.get("turn_signal", "Off"))
        except ValueError:
            signal = TurnSignal.OFF
        return cls(
            steer_axis=_clamp(doc.get("steer_axis", 0.0), -1.0, 1.0),
            throttle_axis=_clamp(doc.get("throttle_axis", 0.0), 0.0, 1.0),
            brake_axis=_clamp(doc.get("brake_axis", 0.0), 0.0, 1.0),
            turn_signal=signal,
            estop=bool(doc.get("estop", False)),
            reset=bool(doc.get("reset", False)),
        )

    def to_command(self, max_steer: float, now: float) -> ControlCommand:
        return ControlCommand(throttle=self.throttle_axis, brake=self.brake_axis,
                              steer=self.steer_axis * max_steer,
                              turn_signal=self.turn_signal, issued_at=now)


class CockpitChannel:
    """Latest-frame / latest-input cell bridging the tick loop and sockets."""

    def __init__(self, port: int):
        self.port = port
        self._lock = threading.Lock()
        self._input: Optional[DriverInput] = None
        self._clients: set = set()
        self._config_msg: Optional[str] = None
        self._last_publish_time: Optional[float] = None
        self._server = None
        self._thread: Optional[threading.Thread] = None
        self.frames_sent = 0

    # -- tick-loop side ------------------------------------------------------

    def latest_input(self) -> Optional[DriverInput]:
        with self._lock:
            return self._input

    def publish(self, world: WorldState, path: WaypointPath, scenario: ScenarioConfig,
                mode: str, eb_status: str, gap: Optional[float],
                lateral_error: float) -> None:
        now = world.time
        if (self._last_publish_time is not None
                and now - self._last_publish_time < FRAME_PERIOD - 1e-9):
            return
        self._last_publish_time = now
        s_ego, _ = path.project(world.ego.pose.x, world.ego.pose.y)
        waypoints = [[round(p.x, 3), round(p.y, 3)]
                     for p in path.resample_ahead(s_ego, 40.0, 2.0)]
        frame = {
            "t": "frame", "v": PROTOCOL_VERSION,
            "time": now,
            "ego": {"x": world.ego.pose.x, "y": world.ego.pose.y,
                    "heading": world.ego.pose.heading, "speed": world.ego.speed,
                    "steer": world.ego.steer},
            "actors": [{"id": a.id, "kind": a.kind.value, "x": a.pose.x, "y": a.pose.y}
                       for a in world.actors],
            "waypoints": waypoints,
            "mode": mode, "eb_status": eb_status,
            "gap": gap, "lateral_error": lateral_error,
        }
        self._broadcast(json.dumps(frame, separators=(",", ":")))
        self.frames_sent += 1

    # -- socket side ----------------------------------------------------------

    def set_map(self, path: WaypointPath, map_name: str) -> None:
        self._config_msg = json.dumps({
            "t": "config", "v": PROTOCOL_VERSION, "map_name": map_name,
            "lane_width": path.lane_width, "closed": path.closed,
            "points": [[round(float(x), 3), round(float(y), 3)] for x, y in path.xy],
        }, separators=(",", ":"))

    def _broadcast(self, text: str) -> None:
        with self._lock:
            clients = list(self._clients)
        for ws in clients:
            try:
                ws.send(text)
            except Exception:
                with self._lock:
                    self._clients.discard(ws)

    def _handler(self, ws) -> None:
        if getattr(ws, "request", None) is not None and ws.request.path != COCKPIT_PATH:
            ws.close(code=1008, reason=f"use {COCKPIT_PATH}")
            return
        if self._config_msg:
            ws.send(self._config_msg)
        with self._lock:
            self._clients.add(ws)
        try:
            for raw in ws:
                try:
                    doc = json.loads(raw)
                except (json.JSONDecodeError, UnicodeDecodeError):
                    continue
                if isinstance(doc, dict) and doc.get("t") == "input":
                    parsed = DriverInput.from_json(doc)
                    with self._lock:
                        self._input = parsed
        finally:
            with self._lock:
                self._clients.discard(ws)

    def start(self) -> None:
        from websockets.sync.server import serve
        self._server = serve(self._handler, "127.0.0.1", self.port)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
