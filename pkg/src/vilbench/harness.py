"""Scenario runner for the three deployment stages.

Internal: every module in this process, virtual time, fully deterministic.
External: the car-server stack moves to a child process and talks the
length-prefixed JSON protocol in lockstep (the world waits for each tick's
control reply). ViL: external plus a gateway child between the car server
and dynamics, with E2E-protected frames on the control path and channel
kill / transport-delay injection.
"""

from __future__ import annotations

import math
import queue
import socket
import struct
import subprocess
import sys
import threading
import time as wallclock
from dataclasses import dataclass, replace
from typing import Optional

from . import protocol as proto
from .cecas import CentralCarServer
from .command import ControlCommand, TurnSignal
from .dynamics import EgoVehicleState
from .errors import ConfigError, PeerUnreachable, ProtocolViolation, DivergenceFound, OffTrack
from .gateway import (DATA_ID_CONTROL_PRIMARY, DATA_ID_CONTROL_SECONDARY,
                      DATA_ID_EMERGENCY_STOP, DATA_ID_VEHICLE_STATE, E2EFrame,
                      encode_frame)
from .geometry import WaypointPath, builtin_map_json, lateral_error, load_map
from .runlog import LatencyRecord, RunEvent, RunLog, TickRow
from .scenario import (ScenarioConfig, Stage, StageConfig, scenario_from_json,
                       scenario_to_json)
from .sensors import CameraStream, Detection, Scheduler, SignalClass, capture_frame
from .worldcore import (ActorKind, WorldState, distance_to_lead, remove_actors,
                        spawn_ahead, step)

COAST = ControlCommand()
PARTICIPANTS = frozenset({"controller", "scripted-actors", "dynamics"})


def resolve_map(map_name: str) -> tuple[str, WaypointPath]:
    """Map source text + parsed path for a bundled name or a file path."""
    if map_name in ("straight_1km", "oval_588"):
        src = builtin_map_json(map_name)
    else:
        try:
            with open(map_name, "r", encoding="utf-8") as fh:
                src = fh.read()
        except OSError as exc:
            raise ConfigError(f"map {map_name!r} is neither bundled nor readable: {exc}") from exc
    return src, load_map(src)


@dataclass
class CycleResult:
    command: ControlCommand
    mode: str
    eb_status: str
    eb_trigger_time: Optional[float]
    eb_trigger_frame: Optional[int]
    events: list[RunEvent]


class InternalBackend:
    """Whole control stack in-process (the SiL-like internal stage)."""

    def __init__(self, scenario: ScenarioConfig, path: WaypointPath):
        self.cecas = CentralCarServer(
            path, scenario.vehicle, scenario.acc, scenario.lka,
            eb_trigger_distance=scenario.eb_trigger_distance,
            plan_horizon=scenario.plan_horizon)

    def deliver(self, det: Detection) -> None:
        self.cecas.deliver(det)

    def reset_emergency_brake(self) -> None:
        self.cecas.reset_emergency_brake()

    def control_cycle(self, tick: int, now: float, ego: EgoVehicleState) -> CycleResult:
        t = self.cecas.control_cycle(now, ego)
        return CycleResult(command=t.command, mode="ExternalControl",
                           eb_status=t.eb_status.value, eb_trigger_time=t.eb_trigger_time,
                           eb_trigger_frame=t.eb_trigger_frame, events=[])

    def close(self) -> None:
        pass


class _Peer:
    """One spawned (or dialed) stage process plus its socket."""

    def __init__(self, role: str, sock: socket.socket, process: Optional[subprocess.Popen]):
        self.role = role
        self.sock = sock
        self.process = process

    def send(self, msg: dict) -> None:
        try:
            proto.send_msg(self.sock, msg)
        except OSError as exc:
            raise PeerUnreachable(f"{self.role} died: {exc}") from exc

    def recv(self) -> dict:
        try:
            msg = proto.recv_msg(self.sock)
        except OSError as exc:
            raise PeerUnreachable(f"{self.role} died: {exc}") from exc
        if msg is None:
            raise PeerUnreachable(f"{self.role} closed the connection mid-run")
        return msg

    def close(self) -> None:
        try:
            self.sock.close()
        finally:
            if self.process is not None:
                try:
                    self.process.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self.process.kill()
                    self.process.wait()


def _spawn_peers(roles: list[str], stage: StageConfig, hello_body: dict) -> dict[str, _Peer]:
    """Start child processes (or dial endpoints) and complete the handshake."""
    peers: dict[str, _Peer] = {}
    to_spawn = [r for r in roles if r not in stage.endpoints]
    listener = None
    procs: dict[str, subprocess.Popen] = {}
    if to_spawn:
        listener = socket.create_server(("127.0.0.1", 0))
        listener.settimeout(15.0)
        port = listener.getsockname()[1]
        for role in to_spawn:
            procs[role] = subprocess.Popen(
                [sys.executable, "-m", "vilbench.remote", "--role", role,
                 "--connect", f"127.0.0.1:{port}"],
                stdout=subprocess.DEVNULL)
    try:
        for role in roles:
            if role in stage.endpoints:
                host, _, p = stage.endpoints[role].rpartition(":")
                sock = socket.create_connection((host, int(p)), timeout=15.0)
                hello = proto.expect(proto.recv_msg(sock), proto.MSG_HELLO)
            else:
                sock, _ = listener.accept()
                hello = proto.expect(proto.recv_msg(sock), proto.MSG_HELLO)
            peer_role = hello["role"]
            if peer_role not in roles or peer_role in peers:
                raise ProtocolViolation(f"unexpected hello role {peer_role!r}")
            peer = _Peer(peer_role, sock, procs.get(peer_role))
            proto.send_msg(sock, {"t": proto.MSG_HELLO, "role": "world", **hello_body})
            peers[peer_role] = peer
    except (socket.timeout, ConnectionError, OSError) as exc:
        for p in procs.values():
            p.kill()
        raise PeerUnreachable(f"stage peers did not connect: {exc}") from exc
    finally:
        if listener is not None:
            listener.close()
    return peers


class RemoteCecasBackend:
    """External stage: the car server lives in a child process."""

    role_modes = "external"

    def __init__(self, scenario: ScenarioConfig, stage: StageConfig, map_src: str):
        hello = {"scenario": scenario_to_json(scenario), "map_src": map_src,
                 "mode": self.role_modes, "lockstep": stage.lockstep}
        self.peers = _spawn_peers(["cecas"], stage, hello)
        self.cecas = self.peers["cecas"]
        self._pending: list[Detection] = []
        self.lockstep = stage.lockstep
        self._inbox: Optional[queue.Queue] = None
        self._last_result = CycleResult(command=COAST, mode="ExternalControl",
                                        eb_status="Normal", eb_trigger_time=None,
                                        eb_trigger_frame=None, events=[])
        if not self.lockstep:
            self._inbox = queue.Queue()
            threading.Thread(target=self._pump, args=(self.cecas,), daemon=True).start()

    def _pump(self, peer: _Peer) -> None:
        try:
            while True:
                msg = proto.recv_msg(peer.sock)
                self._inbox.put(msg)
                if msg is None or msg["t"] == proto.MSG_BYE:
                    return
        except (OSError, ProtocolViolation):
            self._inbox.put(None)

    def deliver(self, det: Detection) -> None:
        det = replace(det, wall_delivery_time=wallclock.time())
        self._pending.append(det)

    def reset_emergency_brake(self) -> None:
        self.cecas.send({"t": proto.MSG_MODE_EVENT, "kind": "reset_emergency_brake"})

    def _send_tick(self, tick: int, now: float, ego: EgoVehicleState) -> None:
        for det in self._pending:
            self.cecas.send({"t": proto.MSG_DETECTION, **proto.detection_to_json(det)})
        self._pending.clear()
        self.cecas.send({"t": proto.MSG_TICK_STATE, "tick": tick, "time": now,
                         "ego": proto.ego_to_json(ego)})

    def control_cycle(self, tick: int, now: float, ego: EgoVehicleState) -> CycleResult:
        self._send_tick(tick, now, ego)
        if not self.lockstep:
            return self._poll_free_running()
        reply = proto.expect(self.cecas.recv(), proto.MSG_CONTROL_REPLY)
        if reply["tick"] != tick:
            raise ProtocolViolation(f"lockstep reply for tick {reply['tick']}, expected {tick}")
        return CycleResult(command=proto.command_from_json(reply["command"]),
                           mode="ExternalControl", eb_status=reply["eb_status"],
                           eb_trigger_time=reply["eb_trigger_time"],
                           eb_trigger_frame=reply["eb_trigger_frame"], events=[])

    def _poll_free_running(self) -> CycleResult:
        # the world does not wait: apply the newest reply that has arrived
        while True:
            try:
                msg = self._inbox.get_nowait()
            except queue.Empty:
                break
            if msg is None:
                raise PeerUnreachable("cecas closed while free-running")
            if msg["t"] == proto.MSG_CONTROL_REPLY:
                self._last_result = CycleResult(
                    command=proto.command_from_json(msg["command"]),
                    mode="ExternalControl", eb_status=msg["eb_status"],
                    eb_trigger_time=msg["eb_trigger_time"],
                    eb_trigger_frame=msg["eb_trigger_frame"], events=[])
        return replace(self._last_result, events=[])

    def close(self) -> None:
        for peer in self.peers.values():
            try:
                peer.send({"t": proto.MSG_BYE})
            except PeerUnreachable:
                pass
            peer.close()


class VilBackend(RemoteCecasBackend):
    """ViL stage: external plus the gateway process on the control path."""

    role_modes = "vil"

    def __init__(self, scenario: ScenarioConfig, stage: StageConfig, map_src: str):
        if not stage.lockstep:
            raise ConfigError("free-running mode is supported for the external stage only")
        hello = {"scenario": scenario_to_json(scenario), "map_src": map_src,
                 "mode": self.role_modes, "lockstep": stage.lockstep}
        self.peers = _spawn_peers(["cecas", "gateway"], stage, hello)
        self.cecas = self.peers["cecas"]
        self.gateway = self.peers["gateway"]
        self._pending = []
        self.lockstep = True
        self.stage = stage
        self._bench_counters = {DATA_ID_VEHICLE_STATE: 0, DATA_ID_EMERGENCY_STOP: 0}
        self._estop_requested = False

    def request_emergency_stop(self) -> None:
        self._estop_requested = True

    def _bench_frame(self, data_id: int, payload: bytes) -> E2EFrame:
        frame = encode_frame(data_id, self._bench_counters[data_id], payload)
        self._bench_counters[data_id] = (self._bench_counters[data_id] + 1) % 256
        return frame

    def control_cycle(self, tick: int, now: float, ego: EgoVehicleState) -> CycleResult:
        self._send_tick(tick, now, ego)
        frames = []
        while True:
            msg = self.cecas.recv()
            if msg["t"] == proto.MSG_GATEWAY_FRAME:
                frames.append(msg)
                continue
            reply = proto.expect(msg, proto.MSG_CONTROL_REPLY)
            break
        if reply["tick"] != tick:
            raise ProtocolViolation(f"lockstep reply for tick {reply['tick']}, expected {tick}")

        # vehicle state report first so the gateway clock is current, then
        # the E2E command frames minus any killed channel, then bench requests
        state_frame = self._bench_frame(DATA_ID_VEHICLE_STATE,
                                        struct.pack("<dd", now, ego.speed))
        self.gateway.send({"t": proto.MSG_GATEWAY_FRAME, "tick": tick,
                           "frame": state_frame.to_bytes().hex()})
        for msg in frames:
            raw = bytes.fromhex(msg["frame"])
            data_id = int.from_bytes(raw[0:2], "big")
            if (data_id == DATA_ID_CONTROL_PRIMARY and self.stage.kill_primary_at is not None
                    and now >= self.stage.kill_primary_at):
                continue
            if (data_id == DATA_ID_CONTROL_SECONDARY and self.stage.kill_secondary_at is not None
                    and now >= self.stage.kill_secondary_at):
                continue
            self.gateway.send({"t": proto.MSG_GATEWAY_FRAME, "tick": tick, "frame": msg["frame"]})
        if self._estop_requested:
            frame = self._bench_frame(DATA_ID_EMERGENCY_STOP, b"\x01")
            self.gateway.send({"t": proto.MSG_GATEWAY_FRAME, "tick": tick,
                               "frame": frame.to_bytes().hex()})
            self._estop_requested = False
        self.gateway.send({"t": proto.MSG_TICK_STATE, "tick": tick, "time": now,
                           "ego": proto.ego_to_json(ego)})

        events = []
        while True:
            msg = self.gateway.recv()
            if msg["t"] == proto.MSG_MODE_EVENT:
                events.append(RunEvent(msg["time"], msg["kind"], msg.get("detail", "")))
                continue
            gw_reply = proto.expect(msg, proto.MSG_CONTROL_REPLY)
            break
        if gw_reply["tick"] != tick:
            raise ProtocolViolation(f"gateway reply for tick {gw_reply['tick']}, expected {tick}")
        return CycleResult(command=proto.command_from_json(gw_reply["command"]),
                           mode=gw_reply["mode"], eb_status=reply["eb_status"],
                           eb_trigger_time=reply["eb_trigger_time"],
                           eb_trigger_frame=reply["eb_trigger_frame"], events=events)


def _driver_command(scenario: ScenarioConfig, now: float) -> ControlCommand:
    active = None
    for sp in scenario.driver_script:
        if sp.time <= now:
            active = sp
        else:
            break
    if active is None:
        return COAST
    return ControlCommand(throttle=active.throttle, brake=active.brake, steer=active.steer,
                          turn_signal=active.turn_signal, issued_at=now)


class _DelayLine:
    """Deterministic per-hop transport delay on the virtual timeline."""

    def __init__(self, delay: float):
        self.delay = delay
        self._queue: list[tuple[float, ControlCommand]] = []
        self._current = COAST

    def push(self, now: float, cmd: ControlCommand) -> None:
        if self.delay == 0.0:
            self._current = cmd
        else:
            self._queue.append((now + self.delay, cmd))

    def effective(self, now: float) -> ControlCommand:
        while self._queue and self._queue[0][0] <= now:
            self._current = self._queue.pop(0)[1]
        return self._current


def run_scenario(scenario: ScenarioConfig, stage: StageConfig = StageConfig(),
                 cockpit=None) -> RunLog:
    """Execute one scenario and return its run log.

    Early divergence (off-track, collision) terminates gracefully with a
    partial log and `log.terminated` set.
    """
    map_src, path = resolve_map(scenario.map_name)
    scheduler = Scheduler(scenario.tick_period, scenario.comfort_period)
    camera = CameraStream(scenario.camera, scenario.seed)
    log = RunLog(scenario_name=scenario.name, stage=stage.stage.value, seed=scenario.seed,
                 tick_period=scenario.tick_period,
                 config_snapshot={"scenario": scenario_to_json(scenario),
                                  "stage": {"stage": stage.stage.value,
                                            "lockstep": stage.lockstep,
                                            "injected_transport_delay": stage.injected_transport_delay,
                                            "kill_primary_at": stage.kill_primary_at,
                                            "kill_secondary_at": stage.kill_secondary_at}})

    manual = scenario.name == "ManualDrive"
    backend = None
    if not manual:
        if stage.stage is Stage.INTERNAL:
            backend = InternalBackend(scenario, path)
        elif stage.stage is Stage.EXTERNAL:
            backend = RemoteCecasBackend(scenario, stage, map_src)
        else:
            backend = VilBackend(scenario, stage, map_src)

    # initial world: ego on (or laterally offset from) the centerline
    ego_pose = path.point_at(scenario.ego_start_station)
    if scenario.ego_start_offset:
        off = scenario.ego_start_offset
        ego_pose = ego_pose.moved(-off * math.sin(ego_pose.heading),
                                  off * math.cos(ego_pose.heading))
    world = WorldState(tick_index=0, tick_period=scenario.tick_period,
                       ego=EgoVehicleState(pose=ego_pose, speed=scenario.ego_start_speed))
    for spec in scenario.actors:
        world = spawn_ahead(world, spec.kind, spec.ahead, spec.speed, path=path)

    command_hops = {Stage.INTERNAL: 0, Stage.EXTERNAL: 1, Stage.VIL: 2}[stage.stage]
    delay_line = _DelayLine(stage.injected_transport_delay * command_hops)
    detection_delay = stage.injected_transport_delay if stage.stage is not Stage.INTERNAL else 0.0

    pending_events = sorted(scenario.events, key=lambda e: e.time)
    event_idx = 0
    estop_active = False
    prev_world = world           # snapshot captures between the previous and current tick
    visible_since: Optional[float] = None   # pedestrian visibility onset
    frame_capture_times: dict[int, float] = {}
    pending_latency: Optional[dict] = None
    killed_logged = {"primary": False, "secondary": False}
    n_base = scheduler.base_ticks_for(scenario.duration)
    wall_start = wallclock.time()
    mode_str = "ManualDrive" if manual else "ExternalControl"

    try:
        tick = 0
        for base_tick in range(n_base):
            due = scheduler.due(base_tick)
            if SignalClass.COMFORT in due:
                log.comfort_emissions += 1
            if SignalClass.CONTROL not in due:
                continue
            now = tick * scenario.tick_period

            if stage.realtime:
                deadline = wall_start + now
                lag = deadline - wallclock.time()
                if lag > 0:
                    wallclock.sleep(lag)

            # stage-level fault injection markers, logged once
            if (stage.kill_primary_at is not None and now >= stage.kill_primary_at
                    and not killed_logged["primary"]):
                killed_logged["primary"] = True
                log.events.append(RunEvent(now, "kill_primary", "channel cut by harness"))
            if (stage.kill_secondary_at is not None and now >= stage.kill_secondary_at
                    and not killed_logged["secondary"]):
                killed_logged["secondary"] = True
                log.events.append(RunEvent(now, "kill_secondary", "channel cut by harness"))

            # 1. scenario events due at this tick
            while event_idx < len(pending_events) and pending_events[event_idx].time <= now:
                ev = pending_events[event_idx]
                event_idx += 1
                log.events.append(RunEvent(now, ev.kind, ""))
                if ev.kind == "spawn_pedestrian":
                    world = spawn_ahead(world, ActorKind.PEDESTRIAN, ev.param("distance"),
                                        ev.param("speed"), path=path)
                    visible_since = now
                elif ev.kind == "spawn_lead":
                    world = spawn_ahead(world, ActorKind.LEAD_VEHICLE, ev.param("ahead"),
                                        ev.param("speed"), path=path)
                elif ev.kind == "clear_pedestrians":
                    world = remove_actors(world, ActorKind.PEDESTRIAN)
                    visible_since = None
                elif ev.kind == "reset_emergency_brake":
                    if backend is not None:
                        backend.reset_emergency_brake()
                    pending_latency = None
                elif ev.kind == "set_extra_load_delay":
                    camera.cfg = replace(camera.cfg, extra_load_delay=ev.param("delay"))
                elif ev.kind == "estop":
                    if isinstance(backend, VilBackend):
                        backend.request_emergency_stop()
                    else:
                        estop_active = True
                else:
                    raise ConfigError(f"unknown scenario event {ev.kind!r}")

            # 2. free-running camera: frames due since the last control tick
            for frame_id, t_capture in camera.due_captures(now):
                snapshot = world if t_capture == now else prev_world
                det = camera_capture(camera, snapshot, scenario, frame_id, t_capture)
                if det is None:
                    continue
                frame_capture_times[det.frame_id] = det.capture_time
                if detection_delay:
                    det = replace(det, delivery_time=det.delivery_time + detection_delay)
                if backend is not None:
                    if stage.stage is not Stage.INTERNAL:
                        det = replace(det, wall_capture_time=wallclock.time())
                    backend.deliver(det)

            # 3. control cycle
            if manual:
                cockpit_input = cockpit.latest_input() if cockpit is not None else None
                if cockpit_input is not None:
                    cmd = cockpit_input.to_command(scenario.vehicle.max_steer, now)
                    if cockpit_input.estop:
                        estop_active = True
                        log.events.append(RunEvent(now, "mode_change",
                                                   "ManualDrive->EmergencyStop (Bench)"))
                    if cockpit_input.reset and estop_active:
                        estop_active = False
                        log.events.append(RunEvent(now, "mode_change",
                                                   "EmergencyStop->ManualDrive (Bench)"))
                else:
                    cmd = _driver_command(scenario, now)
                result = CycleResult(command=cmd, mode="ManualDrive", eb_status="Normal",
                                     eb_trigger_time=None, eb_trigger_frame=None, events=[])
            else:
                result = backend.control_cycle(tick, now, world.ego)
            for ev in result.events:
                log.events.append(ev)
            mode_str = result.mode

            if estop_active and not isinstance(backend, VilBackend):
                if mode_str != "EmergencyStop":
                    log.events.append(RunEvent(now, "mode_change", f"{mode_str}->EmergencyStop (Bench)"))
                mode_str = "EmergencyStop"
                result.command = ControlCommand(throttle=0.0, brake=1.0,
                                                steer=world.ego.steer,
                                                turn_signal=TurnSignal.HAZARD, issued_at=now)

            delay_line.push(now, result.command)
            effective = delay_line.effective(now)

            # 4. emergency-brake latency bookkeeping
            if (pending_latency is None and result.eb_status == "Braking"
                    and result.eb_trigger_time is not None
                    and not any(r.trigger_time == result.eb_trigger_time
                                for r in log.latency_records)):
                onset = visible_since
                if onset is None:
                    onset = frame_capture_times.get(result.eb_trigger_frame,
                                                    result.eb_trigger_time)
                pending_latency = {"trigger_frame": result.eb_trigger_frame,
                                   "capture_time": onset,
                                   "trigger_time": result.eb_trigger_time}
            if pending_latency is not None and effective.brake >= 1.0:
                log.latency_records.append(LatencyRecord(brake_applied_time=now,
                                                         **pending_latency))
                pending_latency = None

            # 5. per-tick telemetry row
            gap = distance_to_lead(world, path, scenario.vehicle)
            log.rows.append(TickRow(
                tick=tick, time=now, x=world.ego.pose.x, y=world.ego.pose.y,
                heading=world.ego.pose.heading, speed=world.ego.speed, steer=world.ego.steer,
                throttle=effective.throttle, brake=effective.brake,
                lateral_error=lateral_error(world.ego.pose, path), gap=gap,
                mode=mode_str, eb_status=result.eb_status))
            log.control_emissions += 1

            if gap is not None and gap <= 0.0:
                log.events.append(RunEvent(now, "collision", f"gap {gap:.3f} m"))
                log.terminated = "collision"
                break

            # 6. advance the world
            prev_world = world
            world = step(world, command=effective, params=scenario.vehicle, path=path,
                         participants=PARTICIPANTS, done=PARTICIPANTS)
            tick += 1

            if cockpit is not None:
                cockpit.publish(world, path, scenario, mode_str, result.eb_status, gap,
                                log.rows[-1].lateral_error)
    except OffTrack as exc:
        log.events.append(RunEvent(len(log.rows) * scenario.tick_period, "off_track", str(exc)))
        log.terminated = "off_track"
    finally:
        if backend is not None:
            backend.close()

    return log


def camera_capture(camera: CameraStream, snapshot: WorldState, scenario: ScenarioConfig,
                   frame_id: int, t_capture: float) -> Optional[Detection]:
    return capture_frame(snapshot, camera.cfg, camera.rng, scenario.vehicle,
                         frame_id=frame_id, capture_time=t_capture)


def replay_run(run_dir: str) -> int:
    """Re-run a saved internal-stage log and verify byte-identical rows.

    Returns the number of compared rows; raises DivergenceFound on the first
    mismatch.
    """
    saved = RunLog.load(run_dir)
    if saved.stage != Stage.INTERNAL.value:
        raise ConfigError(f"replay requires an internal-stage log, got {saved.stage!r}")
    scenario = scenario_from_json(saved.config_snapshot["scenario"])
    fresh = run_scenario(scenario, StageConfig(stage=Stage.INTERNAL))
    fresh_lines = fresh.row_lines()
    saved_lines = saved.raw_lines if saved.raw_lines is not None else saved.row_lines()
    for i, (a, b) in enumerate(zip(saved_lines, fresh_lines)):
        if a != b:
            raise DivergenceFound(i, expected=b, actual=a)
    if len(saved_lines) != len(fresh_lines):
        n = min(len(saved_lines), len(fresh_lines))
        raise DivergenceFound(n, expected=f"{len(fresh_lines)} rows", actual=f"{len(saved_lines)} rows")
    return len(fresh_lines)
