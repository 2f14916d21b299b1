"""Authoritative world: ego twin, scripted actors, synchronous tick stepping.

The world advances only when every registered participant has reported for
the current tick. Scripted actors (lead vehicle, pedestrians) follow the
centerline at constant speed with exact per-tick displacement; the ego is
advanced by the dynamics module from the latest accepted control command.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .command import ControlCommand
from .dynamics import EgoVehicleState, VehicleParams, step_ego
from .errors import DuplicateActor, ParticipantMissing
from .geometry import Pose2D, WaypointPath

DEFAULT_TICK_PERIOD = 0.020  # s, the 20 ms control cadence


class ActorKind(Enum):
    EGO_VEHICLE = "EgoVehicle"
    LEAD_VEHICLE = "LeadVehicle"
    PEDESTRIAN = "Pedestrian"


@dataclass(frozen=True)
class ActorState:
    """A scripted (non-ego) traffic participant."""

    id: int
    kind: ActorKind
    pose: Pose2D
    speed: float          # m/s, >= 0; constant-speed script along the path
    spawned_at: float     # virtual seconds
    station: float = 0.0  # arc length of pose on the centerline

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"scripted actor speed must be >= 0, got {self.speed}")


@dataclass(frozen=True)
class WorldState:
    """Snapshot of the world at one tick; `time` is derived, never stored."""

    tick_index: int = 0
    tick_period: float = DEFAULT_TICK_PERIOD
    ego: EgoVehicleState = field(default_factory=EgoVehicleState)
    actors: tuple[ActorState, ...] = ()

    @property
    def time(self) -> float:
        return self.tick_index * self.tick_period

    def actor_by_id(self, actor_id: int) -> Optional[ActorState]:
        for a in self.actors:
            if a.id == actor_id:
                return a
        return None

    def next_actor_id(self) -> int:
        return max((a.id for a in self.actors), default=0) + 1


def step(world: WorldState, *, command: ControlCommand, params: VehicleParams,
         path: WaypointPath, participants: frozenset[str] = frozenset(),
         done: frozenset[str] = frozenset()) -> WorldState:
    """Advance the world by one tick.

    Pure given (world, command); raises ParticipantMissing when a registered
    synchronous participant has not reported for this tick (a wiring bug,
    not a timeout).
    """
    missing = participants - done
    if missing:
        raise ParticipantMissing(
            f"tick {world.tick_index}: no completion report from {sorted(missing)}")

    dt = world.tick_period
    ego = step_ego(world.ego, command, params, dt)
    actors = tuple(_advance_scripted(a, dt, path) for a in world.actors)
    return replace(world, tick_index=world.tick_index + 1, ego=ego, actors=actors)


def _advance_scripted(actor: ActorState, dt: float, path: WaypointPath) -> ActorState:
    if actor.speed == 0.0:
        return actor
    # exact constant-velocity script: displacement is speed*dt, no drift
    station = actor.station + actor.speed * dt
    if path.closed:
        station = station % path.length
    pose = path.point_at(station)
    return replace(actor, pose=pose, station=station)


def spawn_actor(world: WorldState, kind: ActorKind, pose: Pose2D, speed: float,
                *, path: WaypointPath, actor_id: int | None = None) -> WorldState:
    """Add a scripted actor at an explicit pose; present from the next snapshot."""
    if actor_id is None:
        actor_id = world.next_actor_id()
    elif world.actor_by_id(actor_id) is not None:
        raise DuplicateActor(f"actor id {actor_id} already present")
    station, _ = path.project(pose.x, pose.y)
    actor = ActorState(id=actor_id, kind=kind, pose=pose, speed=speed,
                       spawned_at=world.time, station=station)
    return replace(world, actors=world.actors + (actor,))


def spawn_ahead(world: WorldState, kind: ActorKind, distance: float, speed: float,
                *, path: WaypointPath) -> WorldState:
    """Spawn on the centerline `distance` meters ahead of the ego's projection.

    This is the placement rule for detection-spawned twins: project the ego
    onto the centerline, advance by the detected distance along arc length.
    """
    s_ego, _ = path.project(world.ego.pose.x, world.ego.pose.y)
    pose = path.point_at(s_ego + distance)
    return spawn_actor(world, kind, pose, speed, path=path)


def remove_actors(world: WorldState, kind: ActorKind) -> WorldState:
    return replace(world, actors=tuple(a for a in world.actors if a.kind is not kind))


def distance_to_lead(world: WorldState, path: WaypointPath,
                     params: VehicleParams) -> Optional[float]:
    """Bumper-to-bumper gap to the nearest lead vehicle along the centerline.

    None when no LeadVehicle exists; <= 0 counts as a collision.
    """
    leads = [a for a in world.actors if a.kind is ActorKind.LEAD_VEHICLE]
    if not leads:
        return None
    s_ego, _ = path.project(world.ego.pose.x, world.ego.pose.y)
    gaps = []
    for lead in leads:
        centers = path.forward_arc_distance(s_ego, lead.station)
        gaps.append(centers - (params.front_overhang + params.rear_overhang))
    return min(gaps)
