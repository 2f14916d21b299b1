"""Scenario and stage configuration, bundled scenario definitions, JSON io."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .cecas import AccParams, LkaParams
from .command import TurnSignal
from .dynamics import VehicleParams
from .errors import ConfigError
from .gateway import GatewayConfig
from .sensors import CameraConfig
from .worldcore import ActorKind

KMH_30 = 30.0 / 3.6  # 8.333... m/s


class Stage(Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"
    VIL = "vil"


@dataclass(frozen=True)
class StageConfig:
    stage: Stage = Stage.INTERNAL
    endpoints: dict = field(default_factory=dict)   # role -> "host:port"; empty = spawn locally
    lockstep: bool = True
    injected_transport_delay: float = 0.0           # s per wire hop (virtual)
    kill_primary_at: Optional[float] = None         # s, stop forwarding primary-channel frames
    kill_secondary_at: Optional[float] = None
    realtime: bool = False                          # wall-pace ticks (cockpit runs)
    cockpit_port: Optional[int] = None

    def __post_init__(self):
        if self.injected_transport_delay < 0:
            raise ConfigError("injected_transport_delay must be >= 0")


@dataclass(frozen=True)
class ActorSpec:
    """Initial scripted actor, placed on the centerline ahead of the ego start."""

    kind: ActorKind
    ahead: float        # m of arc length ahead of the ego's start station
    speed: float = 0.0  # m/s along the path


@dataclass(frozen=True)
class ScenarioEvent:
    """Timed stimulus applied at the first control tick at or after `time`."""

    time: float
    kind: str           # spawn_pedestrian | spawn_lead | clear_pedestrians |
                        # reset_emergency_brake | set_extra_load_delay | estop
    params: tuple[tuple[str, float], ...] = ()

    def param(self, name: str, default: float = 0.0) -> float:
        for k, v in self.params:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class DriverSetpoint:
    """Manual-drive script sample, held until the next setpoint."""

    time: float
    steer: float = 0.0      # rad
    throttle: float = 0.0
    brake: float = 0.0
    turn_signal: TurnSignal = TurnSignal.OFF


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "AccLka"    # ManualDrive | AccLka | EmergencyBrake
    map_name: str = "oval_588"
    duration: float = 60.0  # virtual seconds
    seed: int = 42
    tick_period: float = 0.020
    comfort_period: float = 0.050
    camera: CameraConfig = field(default_factory=CameraConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    acc: AccParams = field(default_factory=AccParams)
    lka: LkaParams = field(default_factory=LkaParams)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    eb_trigger_distance: float = 25.0
    plan_horizon: float = 30.0
    ego_start_station: float = 0.0
    ego_start_offset: float = 0.0   # initial lateral offset from the centerline
    ego_start_speed: float = 0.0
    actors: tuple[ActorSpec, ...] = ()
    events: tuple[ScenarioEvent, ...] = ()
    driver_script: tuple[DriverSetpoint, ...] = ()

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("duration must be > 0")
        if not self.tick_period > 0:
            raise ConfigError("tick_period must be > 0")
        if self.name not in ("ManualDrive", "AccLka", "EmergencyBrake"):
            raise ConfigError(f"unknown scenario name {self.name!r}")


# ---------------------------------------------------------------------------
# bundled scenarios

def acc_lka_scenario(*, map_name: str = "oval_588", duration: float = 120.0,
                     seed: int = 42, lead_ahead: float = 50.0,
                     lead_speed: float = KMH_30, with_lead: bool = True,
                     **overrides: Any) -> ScenarioConfig:
    """Car following with lane keeping: ego starts at rest, lead at 30 km/h."""
    actors = (ActorSpec(ActorKind.LEAD_VEHICLE, lead_ahead, lead_speed),) if with_lead else ()
    return ScenarioConfig(name="AccLka", map_name=map_name, duration=duration, seed=seed,
                          actors=actors, **overrides)


def emergency_brake_scenario(*, map_name: str = "straight_1km", duration: float = 10.0,
                             seed: int = 42, appear_time: float = 6.0,
                             appear_distance: float = 20.0,
                             **overrides: Any) -> ScenarioConfig:
    """ACC cruise baseline; a pedestrian twin appears ahead mid-run."""
    events = (ScenarioEvent(appear_time, "spawn_pedestrian",
                            (("distance", appear_distance), ("speed", 0.0))),)
    return ScenarioConfig(name="EmergencyBrake", map_name=map_name, duration=duration,
                          seed=seed, events=events, **overrides)


def manual_drive_scenario(*, map_name: str = "straight_1km", duration: float = 20.0,
                          seed: int = 42, **overrides: Any) -> ScenarioConfig:
    """Scripted driver inputs: launch, gentle weave, brake to a stop."""
    script = (
        DriverSetpoint(0.0, steer=0.0, throttle=0.5),
        DriverSetpoint(4.0, steer=0.04, throttle=0.4, turn_signal=TurnSignal.LEFT),
        DriverSetpoint(7.0, steer=-0.04, throttle=0.4, turn_signal=TurnSignal.RIGHT),
        DriverSetpoint(10.0, steer=0.0, throttle=0.3, turn_signal=TurnSignal.OFF),
        DriverSetpoint(15.0, steer=0.0, throttle=0.0, brake=0.4),
    )
    return ScenarioConfig(name="ManualDrive", map_name=map_name, duration=duration,
                          seed=seed, driver_script=script, **overrides)


def latency_sweep_scenario(*, n_pre: int = 10, n_post: int = 10, cycle: float = 4.0,
                           appear_distance: float = 15.0, extra_load_delay: float = 0.08,
                           phases: tuple[float, ...] = (), seed: int = 42,
                           **overrides: Any) -> ScenarioConfig:
    """Repeated pedestrian appearances with a mid-run camera load increase.

    The ego holds still (cruise speed 0) so every trigger measures the pure
    detection-to-brake path; `phases` offsets each appearance within its
    cycle to randomize capture alignment.
    """
    events: list[ScenarioEvent] = []
    total = n_pre + n_post
    t = 1.0
    for i in range(total):
        if i == n_pre:
            events.append(ScenarioEvent(t, "set_extra_load_delay",
                                        (("delay", extra_load_delay),)))
            t += 1.0
        phase = phases[i] if i < len(phases) else 0.0
        events.append(ScenarioEvent(t + phase, "spawn_pedestrian",
                                    (("distance", appear_distance), ("speed", 0.0))))
        # re-arm one second after the clear so the stale person frame has
        # aged out of the perception hold before the brake is re-armed
        events.append(ScenarioEvent(t + cycle / 2, "clear_pedestrians"))
        events.append(ScenarioEvent(t + cycle / 2 + 1.0, "reset_emergency_brake"))
        t += cycle
    overrides.setdefault("acc", AccParams(cruise_speed=0.0))
    return ScenarioConfig(name="EmergencyBrake", map_name="straight_1km",
                          duration=t + 1.0, seed=seed, events=tuple(events), **overrides)


BUILTIN_SCENARIOS = {
    "acc_lka": acc_lka_scenario,
    "emergency_brake": emergency_brake_scenario,
    "manual_drive": manual_drive_scenario,
}


# ---------------------------------------------------------------------------
# JSON io: explicit field mapping keeps wire payloads stable

def _enum_value(x: Any) -> Any:
    return x.value if isinstance(x, Enum) else x


def scenario_to_json(sc: ScenarioConfig) -> dict:
    return {
        "name": sc.name, "map_name": sc.map_name, "duration": sc.duration, "seed": sc.seed,
        "tick_period": sc.tick_period, "comfort_period": sc.comfort_period,
        "camera": dataclasses.asdict(sc.camera),
        "vehicle": dataclasses.asdict(sc.vehicle),
        "acc": dataclasses.asdict(sc.acc),
        "lka": dataclasses.asdict(sc.lka),
        "gateway": dataclasses.asdict(sc.gateway),
        "eb_trigger_distance": sc.eb_trigger_distance,
        "plan_horizon": sc.plan_horizon,
        "ego_start_station": sc.ego_start_station,
        "ego_start_offset": sc.ego_start_offset,
        "ego_start_speed": sc.ego_start_speed,
        "actors": [{"kind": a.kind.value, "ahead": a.ahead, "speed": a.speed} for a in sc.actors],
        "events": [{"time": e.time, "kind": e.kind, "params": dict(e.params)} for e in sc.events],
        "driver_script": [
            {"time": d.time, "steer": d.steer, "throttle": d.throttle, "brake": d.brake,
             "turn_signal": d.turn_signal.value} for d in sc.driver_script],
    }


def scenario_from_json(doc: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig(
            name=doc["name"], map_name=doc["map_name"], duration=doc["duration"],
            seed=doc["seed"], tick_period=doc.get("tick_period", 0.020),
            comfort_period=doc.get("comfort_period", 0.050),
            camera=CameraConfig(**doc.get("camera", {})),
            vehicle=VehicleParams(**doc.get("vehicle", {})),
            acc=AccParams(**doc.get("acc", {})),
            lka=LkaParams(**doc.get("lka", {})),
            gateway=GatewayConfig(**doc.get("gateway", {})),
            eb_trigger_distance=doc.get("eb_trigger_distance", 25.0),
            plan_horizon=doc.get("plan_horizon", 30.0),
            ego_start_station=doc.get("ego_start_station", 0.0),
            ego_start_offset=doc.get("ego_start_offset", 0.0),
            ego_start_speed=doc.get("ego_start_speed", 0.0),
            actors=tuple(ActorSpec(ActorKind(a["kind"]), a["ahead"], a.get("speed", 0.0))
                         for a in doc.get("actors", [])),
            events=tuple(ScenarioEvent(e["time"], e["kind"],
                                       tuple(sorted(e.get("params", {}).items())))
                         for e in doc.get("events", [])),
            driver_script=tuple(
                DriverSetpoint(d["time"], d.get("steer", 0.0), d.get("throttle", 0.0),
                               d.get("brake", 0.0),
                               TurnSignal(d.get("turn_signal", "Off")))
                for d in doc.get("driver_script", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario document: {exc}") from exc


def load_scenario(name_or_path: str, **overrides: Any) -> ScenarioConfig:
    """Resolve a bundled scenario name or a JSON scenario file."""
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path](**overrides)
    try:
        with open(name_or_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"no bundled scenario or readable file {name_or_path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {name_or_path!r} is not valid JSON: {exc}") from exc
    sc = scenario_from_json(doc)
    if overrides:
        sc = dataclasses.replace(sc, **overrides)
    return sc
