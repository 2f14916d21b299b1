"""Control command tuple produced by the car server each control cycle."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


class TurnSignal(Enum):
    OFF = "Off"
    LEFT = "Left"
    RIGHT = "Right"
    HAZARD = "Hazard"


class Gear(Enum):
    DRIVE = "Drive"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class ControlCommand:
    """Throttle/brake/steer/turn-signal tuple. Pedals in [0,1], steer in rad."""

    throttle: float = 0.0
    brake: float = 0.0
    steer: float = 0.0
    turn_signal: TurnSignal = TurnSignal.OFF
    issued_at: float = 0.0
    seq: int = 0

    def __post_init__(self):
        for name in ("throttle", "brake", "steer", "issued_at"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if not 0.0 <= self.throttle <= 1.0:
            raise ValueError(f"throttle out of [0,1]: {self.throttle}")
        if not 0.0 <= self.brake <= 1.0:
            raise ValueError(f"brake out of [0,1]: {self.brake}")

    def with_seq(self, seq: int, issued_at: float) -> "ControlCommand":
        return replace(self, seq=seq, issued_at=issued_at)


FULL_BRAKE = ControlCommand(throttle=0.0, brake=1.0, steer=0.0, turn_signal=TurnSignal.HAZARD)
