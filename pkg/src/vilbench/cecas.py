"""Central car server stack: planning, lateral/longitudinal control and the
latched emergency brake.

Lateral control is pure pursuit against the ground-truth centerline;
longitudinal control is a constant-time-gap cruise controller fed by the
camera's vehicle detections, with a feed-forward pedal map inverting the
longitudinal dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .command import ControlCommand, TurnSignal
from .dynamics import EgoVehicleState, VehicleParams, resistance_force
from .errors import OffTrack
from .geometry import Pose2D, WaypointPath, normalize_angle
from .sensors import Detection, ObjectClass, PerceptionMailbox, select_perception


@dataclass(frozen=True)
class AccParams:
    standstill_gap: float = 5.0      # m, gap held at zero speed
    time_gap: float = 1.5            # s
    gap_gain: float = 0.2            # 1/s^2
    speed_gain: float = 0.4          # 1/s
    accel_min: float = -6.0          # m/s^2
    accel_max: float = 2.0           # m/s^2
    cruise_speed: float = 13.89      # m/s (~50 km/h)

    def __post_init__(self):
        if not self.standstill_gap > 0 or not self.time_gap > 0:
            raise ValueError("standstill_gap and time_gap must be > 0")
        if not self.accel_min < 0 < self.accel_max:
            raise ValueError("need accel_min < 0 < accel_max")


@dataclass(frozen=True)
class LkaParams:
    # lookahead tuned so the 30 m-radius oval corners track within 0.15 m
    lookahead_base: float = 2.0        # m
    lookahead_speed_gain: float = 0.25  # s; lookahead = base + gain*speed
    wheelbase: float = 2.99            # m, shared with VehicleParams

    def __post_init__(self):
        if not self.lookahead_base > 0:
            raise ValueError("lookahead_base must be > 0")


class EbStatus(Enum):
    NORMAL = "Normal"
    BRAKING = "Braking"


@dataclass(frozen=True)
class EmergencyBrakeState:
    status: EbStatus = EbStatus.NORMAL
    trigger_time: Optional[float] = None
    trigger_frame: Optional[int] = None
    trigger_distance: float = 25.0  # m, person closer than this latches the brake


OFF_TRACK_FACTOR = 5.0  # ego farther than lane_width * this is a diverged run


def plan_waypoints(path: WaypointPath, ego: EgoVehicleState, horizon: float,
                   spacing: float = 1.0) -> list[Pose2D]:
    """Centerline points ahead of the ego's projection, 1 m apart, wrapping
    on closed tracks. Raises OffTrack when the ego has left the road."""
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    s_ego, dist = path.project(ego.pose.x, ego.pose.y)
    if dist > path.lane_width * OFF_TRACK_FACTOR:
        raise OffTrack(f"ego {dist:.2f} m from centerline (lane width {path.lane_width})")
    return path.resample_ahead(s_ego, horizon, spacing)


def lateral_control(ego: EgoVehicleState, targets: Sequence[Pose2D], params: LkaParams,
                    *, max_steer: float = 0.5, spacing: float = 1.0) -> float:
    """Pure pursuit steering toward the first target at least one lookahead
    distance ahead (arc distance along the target list)."""
    if not targets:
        raise ValueError("no target points")
    lookahead = params.lookahead_base + params.lookahead_speed_gain * ego.speed
    idx = min(len(targets) - 1, max(0, int(math.ceil(lookahead / spacing)) - 1))
    target = targets[idx]
    dx = target.x - ego.pose.x
    dy = target.y - ego.pose.y
    chord = math.hypot(dx, dy)
    if chord < 1e-9:
        return 0.0
    alpha = normalize_angle(math.atan2(dy, dx) - ego.pose.heading)
    steer = math.atan(2.0 * params.wheelbase * math.sin(alpha) / chord)
    return min(max(steer, -max_steer), max_steer)


def acc_law(gap: Optional[float], v_ego: float, v_lead: float, params: AccParams) -> float:
    """Desired acceleration: constant-time-gap PD law toward the lead, or
    cruise-speed regulation when no lead is in range. Clamped.

    Following never exceeds the cruise set speed: the weaker of the gap law
    and the cruise governor wins, as in production ACC.
    """
    cruise = params.speed_gain * (params.cruise_speed - v_ego)
    if gap is None:
        raw = cruise
    else:
        desired = params.standstill_gap + params.time_gap * v_ego
        raw = min(params.gap_gain * (gap - desired) + params.speed_gain * (v_lead - v_ego),
                  cruise)
    return min(max(raw, params.accel_min), params.accel_max)


def accel_to_pedals(a_des: float, v_ego: float, params: VehicleParams) -> tuple[float, float]:
    """Feed-forward inversion of the longitudinal dynamics into (throttle, brake).

    Exactly one of the two is nonzero.
    """
    force = params.mass * a_des + resistance_force(v_ego, params)
    if force >= 0.0:
        return min(1.0, force / params.max_traction_force), 0.0
    return 0.0, min(1.0, -force / (params.mass * params.max_brake_decel))


def emergency_brake_update(state: EmergencyBrakeState, perception: Optional[Detection],
                           now: float, *, lka_steer: float = 0.0,
                           ) -> tuple[EmergencyBrakeState, Optional[ControlCommand]]:
    """Evaluate the emergency-brake function for one control cycle.

    Latches into Braking when the current perception holds a Person within
    the trigger distance; once latched, only an explicit reset exits. While
    braking the override is full brake with lane keeping still steering.
    """
    if state.status is EbStatus.NORMAL and perception is not None:
        for obj in perception.objects:
            if obj.object_class is ObjectClass.PERSON and obj.distance <= state.trigger_distance:
                state = replace(state, status=EbStatus.BRAKING, trigger_time=now,
                                trigger_frame=perception.frame_id)
                break
    if state.status is EbStatus.BRAKING:
        override = ControlCommand(throttle=0.0, brake=1.0, steer=lka_steer,
                                  turn_signal=TurnSignal.HAZARD, issued_at=now)
        return state, override
    return state, None


def reset_emergency_brake(state: EmergencyBrakeState) -> EmergencyBrakeState:
    return replace(state, status=EbStatus.NORMAL, trigger_time=None, trigger_frame=None)


@dataclass
class CecasTelemetry:
    """Per-cycle controller outputs surfaced to the run log."""

    command: ControlCommand
    eb_status: EbStatus
    eb_trigger_time: Optional[float]
    eb_trigger_frame: Optional[int]
    perception_frame: Optional[int]
    gap_estimate: Optional[float]


class CentralCarServer:
    """Perception -> planning -> control, invoked once per control cycle."""

    def __init__(self, path: WaypointPath, vehicle: VehicleParams, acc: AccParams,
                 lka: LkaParams, *, eb_trigger_distance: float = 25.0,
                 plan_horizon: float = 30.0):
        self.path = path
        self.vehicle = vehicle
        self.acc = acc
        self.lka = lka
        self.plan_horizon = plan_horizon
        self.mailbox = PerceptionMailbox()
        self.eb = EmergencyBrakeState(trigger_distance=eb_trigger_distance)
        self._seq = 0
        self._last_vehicle_obs: Optional[tuple[float, float]] = None  # (capture_time, gap)
        self._lead_speed_est = 0.0

    def deliver(self, detection: Detection) -> None:
        self.mailbox.deliver(detection)

    def reset_emergency_brake(self) -> None:
        self.eb = reset_emergency_brake(self.eb)

    def _nearest_vehicle(self, det: Detection) -> Optional[float]:
        gaps = [o.distance for o in det.objects if o.object_class is ObjectClass.VEHICLE]
        return min(gaps) if gaps else None

    def _update_lead_estimate(self, det: Optional[Detection], v_ego: float) -> Optional[float]:
        """Track the lead gap; returns the gap and refreshes the speed estimate."""
        if det is None:
            return None
        gap = self._nearest_vehicle(det)
        if gap is None:
            self._last_vehicle_obs = None
            return None
        if self._last_vehicle_obs is not None:
            t0, g0 = self._last_vehicle_obs
            dt = det.capture_time - t0
            if dt > 1e-9:
                self._lead_speed_est = v_ego + (gap - g0) / dt
                self._last_vehicle_obs = (det.capture_time, gap)
        else:
            self._lead_speed_est = v_ego  # first sight: assume matched speed
            self._last_vehicle_obs = (det.capture_time, gap)
        return gap

    def control_cycle(self, now: float, ego: EgoVehicleState) -> CecasTelemetry:
        perception = select_perception(self.mailbox, now)

        targets = plan_waypoints(self.path, ego, self.plan_horizon)
        steer = lateral_control(ego, targets, self.lka, max_steer=self.vehicle.max_steer)

        gap = self._update_lead_estimate(perception, ego.speed)
        a_des = acc_law(gap, ego.speed, self._lead_speed_est, self.acc)
        throttle, brake = accel_to_pedals(a_des, ego.speed, self.vehicle)
        cmd = ControlCommand(throttle=throttle, brake=brake, steer=steer,
                             turn_signal=TurnSignal.OFF, issued_at=now, seq=self._seq)

        self.eb, override = emergency_brake_update(self.eb, perception, now, lka_steer=steer)
        if override is not None:
            cmd = override.with_seq(self._seq, now)
        self._seq += 1
        return CecasTelemetry(
            command=cmd,
            eb_status=self.eb.status,
            eb_trigger_time=self.eb.trigger_time,
            eb_trigger_frame=self.eb.trigger_frame,
            perception_frame=perception.frame_id if perception else None,
            gap_estimate=gap,
        )
