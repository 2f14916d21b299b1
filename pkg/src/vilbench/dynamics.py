"""Ego vehicle motion: longitudinal force balance + kinematic bicycle.

Stands in for the dynamometer bench and powertrain. Longitudinal: traction
minus brake minus rolling/aero resistance, speed clamped at zero (no
reverse). Lateral: kinematic bicycle with a slew-limited steering actuator,
stepped with semi-implicit Euler (heading updated before position).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .command import ControlCommand, Gear
from .geometry import Pose2D

GRAVITY = 9.81  # m/s^2


@dataclass(frozen=True)
class VehicleParams:
    """Powertrain/geometry configuration; defaults approximate a large EV van."""

    mass: float = 2500.0              # kg
    wheelbase: float = 2.99           # m
    max_traction_force: float = 7000.0  # N
    max_brake_decel: float = 8.0      # m/s^2
    c_rr: float = 0.012               # rolling resistance coefficient
    c_aero: float = 0.42              # N/(m/s)^2, lumped 0.5*rho*Cd*A
    max_steer: float = 0.5            # rad
    steer_rate_limit: float = 0.8     # rad/s
    front_overhang: float = 0.9       # m ahead of front axle reference
    rear_overhang: float = 1.0        # m behind rear axle reference

    def __post_init__(self):
        for name in ("mass", "wheelbase", "max_traction_force", "max_brake_decel",
                     "max_steer", "steer_rate_limit", "front_overhang", "rear_overhang"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("c_rr", "c_aero"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.max_steer < math.pi / 2:
            raise ValueError("max_steer must be < pi/2")


@dataclass(frozen=True)
class EgoVehicleState:
    """What the bench would measure and report each tick."""

    pose: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    speed: float = 0.0   # m/s, >= 0
    accel: float = 0.0   # m/s^2, last applied
    steer: float = 0.0   # rad, actuator position
    gear: Gear = Gear.DRIVE

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")


def resistance_force(speed: float, params: VehicleParams) -> float:
    """Rolling + aerodynamic drag at the given speed, in newtons."""
    return params.c_rr * params.mass * GRAVITY + params.c_aero * speed * speed


def step_ego(state: EgoVehicleState, cmd: ControlCommand, params: VehicleParams,
             dt: float) -> EgoVehicleState:
    """Advance the ego by one tick of length dt. Pure; no side effects."""
    # steering actuator slews toward the commanded angle
    target = min(max(cmd.steer, -params.max_steer), params.max_steer)
    max_move = params.steer_rate_limit * dt
    delta = min(max(target - state.steer, -max_move), max_move)
    steer = state.steer + delta

    traction = cmd.throttle * params.max_traction_force
    if state.gear is Gear.NEUTRAL:
        traction = 0.0
    net = (traction
           - cmd.brake * params.mass * params.max_brake_decel
           - resistance_force(state.speed, params))
    accel = net / params.mass

    # heading first, then position along the updated heading, using the
    # speed the vehicle had during this tick; clamp at zero (no reverse)
    v = state.speed
    heading = state.pose.heading + (v / params.wheelbase) * math.tan(steer) * dt
    pose = Pose2D(
        state.pose.x + v * math.cos(heading) * dt,
        state.pose.y + v * math.sin(heading) * dt,
        heading,
    )
    speed = max(0.0, v + accel * dt)
    if speed == 0.0:
        accel = -v / dt if v > 0.0 else 0.0  # report the accel actually realized
    return EgoVehicleState(pose=pose, speed=speed, accel=accel, steer=steer, gear=state.gear)
