"""Camera emulation and signal cadences.

The detection stream free-runs at its own frame rate and is never
synchronized with the world tick; the perception mailbox holds the newest
delivered frame so every control cycle sees the most recent result whose
delivery time has passed. Control- and comfort-class signal cadences run on
a 10 ms base scheduler (the GCD of the 20 ms and 50 ms rates).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .dynamics import VehicleParams
from .worldcore import ActorKind, WorldState


class ObjectClass(Enum):
    PERSON = "Person"
    VEHICLE = "Vehicle"


class SignalClass(Enum):
    CONTROL = "control"
    COMFORT = "comfort"


@dataclass(frozen=True)
class DetectedObject:
    object_class: ObjectClass
    distance: float        # m, longitudinal; > 0
    lateral_offset: float  # m, + left of the ego axis
    confidence: float = 1.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"detection distance must be > 0, got {self.distance}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")


@dataclass(frozen=True)
class Detection:
    """One object-list frame. Times are virtual seconds in the internal
    stage; wall-clock stamps are carried separately when a wire is involved."""

    frame_id: int
    capture_time: float
    delivery_time: float
    objects: tuple[DetectedObject, ...] = ()
    wall_capture_time: Optional[float] = None
    wall_delivery_time: Optional[float] = None

    def __post_init__(self):
        if self.delivery_time < self.capture_time:
            raise ValueError("delivery_time must be >= capture_time")


@dataclass(frozen=True)
class CameraConfig:
    fps: float = 5.0
    processing_delay: float = 0.050   # s, capture -> delivery
    extra_load_delay: float = 0.0     # s, added when the following stack loads the pipe
    range_m: float = 60.0
    fov_half_angle: float = math.pi / 4  # +/- 45 deg frustum
    distance_noise_std: float = 0.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if self.processing_delay < 0 or self.extra_load_delay < 0:
            raise ValueError("delays must be >= 0")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob out of [0,1]")


def next_capture_time(frame_id: int, cfg: CameraConfig, stream_start: float = 0.0) -> float:
    """Capture instant of a frame: stream_start + frame_id / fps, computed
    directly so there is no accumulated float drift."""
    if frame_id < 0:
        raise ValueError("frame_id must be >= 0")
    return stream_start + frame_id / cfg.fps


def capture_frame(world: WorldState, cfg: CameraConfig, rng: np.random.Generator,
                  params: VehicleParams, *, frame_id: int,
                  capture_time: float) -> Optional[Detection]:
    """Ground-truth emulation of the front camera + detector.

    Every actor ahead of the ego, inside the frustum and within range, is
    reported. Vehicles report the bumper gap, persons their longitudinal
    center distance; Gaussian noise on distance, whole-frame Bernoulli
    dropout. Returns None when the frame is dropped.
    """
    if cfg.dropout_prob > 0.0 and rng.random() < cfg.dropout_prob:
        return None

    ego = world.ego
    cos_h = math.cos(ego.pose.heading)
    sin_h = math.sin(ego.pose.heading)
    objects = []
    for actor in sorted(world.actors, key=lambda a: a.id):
        if actor.kind is ActorKind.EGO_VEHICLE:
            continue
        dx = actor.pose.x - ego.pose.x
        dy = actor.pose.y - ego.pose.y
        lon = dx * cos_h + dy * sin_h
        lat = -dx * sin_h + dy * cos_h
        if lon <= 0.0:
            continue
        if math.hypot(lon, lat) > cfg.range_m:
            continue
        if abs(math.atan2(lat, lon)) > cfg.fov_half_angle:
            continue
        if actor.kind is ActorKind.LEAD_VEHICLE:
            object_class = ObjectClass.VEHICLE
            distance = lon - (params.front_overhang + params.rear_overhang)
        else:
            object_class = ObjectClass.PERSON
            distance = lon
        if cfg.distance_noise_std > 0.0:
            distance += rng.normal(0.0, cfg.distance_noise_std)
        if distance <= 0.0:
            continue  # degenerate after noise/overhangs: nothing to report
        objects.append(DetectedObject(object_class, distance, lat))

    return Detection(
        frame_id=frame_id,
        capture_time=capture_time,
        delivery_time=capture_time + cfg.processing_delay + cfg.extra_load_delay,
        objects=tuple(objects),
    )


class PerceptionMailbox:
    """Timestamped cell holding delivered detections, newest-delivery wins."""

    def __init__(self, capacity: int = 32):
        self.history: deque[Detection] = deque(maxlen=capacity)

    def deliver(self, detection: Detection) -> None:
        self.history.append(detection)

    def clear(self) -> None:
        self.history.clear()


def select_perception(mailbox: PerceptionMailbox, now: float) -> Optional[Detection]:
    """The detection with the greatest delivery_time <= now, or None.

    Held constant between deliveries: repeated calls with the same mailbox
    contents and non-decreasing `now` return the same frame until a newer
    delivery becomes visible.
    """
    best: Optional[Detection] = None
    for det in mailbox.history:
        if det.delivery_time <= now:
            if best is None or (det.delivery_time, det.frame_id) > (best.delivery_time, best.frame_id):
                best = det
    return best


class CameraStream:
    """Free-running capture schedule plus seeded noise state for one run."""

    def __init__(self, cfg: CameraConfig, seed: int, stream_start: float = 0.0):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.stream_start = stream_start
        self.next_frame_id = 0

    def due_captures(self, now: float) -> list[tuple[int, float]]:
        """(frame_id, capture_time) for every frame due at or before `now`."""
        due = []
        while True:
            t = next_capture_time(self.next_frame_id, self.cfg, self.stream_start)
            if t > now:
                break
            due.append((self.next_frame_id, t))
            self.next_frame_id += 1
        return due


BASE_PERIOD = 0.010       # s; GCD of the 20 ms and 50 ms cadences
CONTROL_EVERY = 2         # base ticks between control-class emissions
COMFORT_EVERY = 5         # base ticks between comfort-class emissions


def tick_cadence(tick_index: int) -> frozenset[SignalClass]:
    """Signal classes due at a base-scheduler tick (10 ms base period)."""
    due = set()
    if tick_index % CONTROL_EVERY == 0:
        due.add(SignalClass.CONTROL)
    if tick_index % COMFORT_EVERY == 0:
        due.add(SignalClass.COMFORT)
    return frozenset(due)


class Scheduler:
    """Integer-exact cadence scheduler for arbitrary control/comfort periods."""

    def __init__(self, control_period: float = 0.020, comfort_period: float = 0.050):
        control_us = round(control_period * 1e6)
        comfort_us = round(comfort_period * 1e6)
        if control_us <= 0 or comfort_us <= 0:
            raise ValueError("periods must be positive")
        self.base_us = math.gcd(control_us, comfort_us)
        self.control_every = control_us // self.base_us
        self.comfort_every = comfort_us // self.base_us
        self.base_period = self.base_us * 1e-6

    def due(self, base_tick: int) -> frozenset[SignalClass]:
        out = set()
        if base_tick % self.control_every == 0:
            out.add(SignalClass.CONTROL)
        if base_tick % self.comfort_every == 0:
            out.add(SignalClass.COMFORT)
        return frozenset(out)

    def base_ticks_for(self, duration: float) -> int:
        return round(duration * 1e6) // self.base_us
