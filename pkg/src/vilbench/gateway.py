"""Vehicle motion gateway: dual redundant channels, E2E-protected frames,
validity inspection, mode state machine with manual override, fallback
arbitration and the bench emergency stop.

Frames carry a data id, an 8-bit alive counter and a CRC-8 (SAE-J1850
profile: polynomial 0x1D, init 0xFF, final XOR 0xFF, unreflected) so the
receiver can detect corruption, replay and loss.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .command import ControlCommand, TurnSignal
from .errors import IllegalTransition, PayloadTooLong

CRC8_POLY = 0x1D
CRC8_INIT = 0xFF
CRC8_XOROUT = 0xFF

MAX_PAYLOAD = 64

# data id registry
DATA_ID_CONTROL_PRIMARY = 0x0100
DATA_ID_CONTROL_SECONDARY = 0x0101
DATA_ID_VEHICLE_STATE = 0x0200
DATA_ID_MODE_REQUEST = 0x0300
DATA_ID_EMERGENCY_STOP = 0x03FF


def _build_crc8_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ CRC8_POLY) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC8_TABLE = _build_crc8_table()


def crc8(data: bytes) -> int:
    """CRC-8/SAE-J1850 over the given bytes."""
    crc = CRC8_INIT
    for b in data:
        crc = _CRC8_TABLE[crc ^ b]
    return crc ^ CRC8_XOROUT


@dataclass(frozen=True)
class E2EFrame:
    data_id: int      # 16-bit unsigned
    counter: int      # 8-bit alive counter, wraps at 256
    payload: bytes
    crc: int

    def protected_bytes(self) -> bytes:
        return self.data_id.to_bytes(2, "big") + bytes([self.counter]) + self.payload

    def to_bytes(self) -> bytes:
        """Wire layout: [id_hi][id_lo][counter][len][payload...][crc]."""
        return (self.data_id.to_bytes(2, "big") + bytes([self.counter, len(self.payload)])
                + self.payload + bytes([self.crc]))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "E2EFrame":
        if len(raw) < 5:
            raise ValueError(f"frame too short: {len(raw)} bytes")
        length = raw[3]
        if len(raw) != 5 + length:
            raise ValueError(f"frame length field {length} inconsistent with {len(raw)} bytes")
        return cls(data_id=int.from_bytes(raw[0:2], "big"), counter=raw[2],
                   payload=raw[4:4 + length], crc=raw[4 + length])


def encode_frame(data_id: int, counter: int, payload: bytes) -> E2EFrame:
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLong(f"payload {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= data_id <= 0xFFFF:
        raise ValueError("data_id must fit 16 bits")
    counter &= 0xFF
    frame = E2EFrame(data_id, counter, bytes(payload), 0)
    return replace(frame, crc=crc8(frame.protected_bytes()))


class Verdict(Enum):
    OK = "Ok"
    CRC_FAULT = "CrcFault"
    COUNTER_FAULT = "CounterFault"
    TIMEOUT = "Timeout"


class Channel(Enum):
    PRIMARY = "Primary"
    SECONDARY = "Secondary"


@dataclass(frozen=True)
class ChannelState:
    channel: Optional[Channel]  # None for bench-side data-id streams
    last_counter: Optional[int] = None
    last_rx_time: float = 0.0
    consecutive_faults: int = 0
    fault_threshold: int = 3
    rx_timeout: float = 0.100

    def alive(self, now: float) -> bool:
        return (self.consecutive_faults < self.fault_threshold
                and (now - self.last_rx_time) < self.rx_timeout)


def decode_and_check(frame: E2EFrame, state: ChannelState,
                     now: float) -> tuple[Verdict, ChannelState]:
    """Inspect one received frame for validity.

    Ok requires a matching CRC, a counter that is exactly last+1 mod 256
    (or a fresh channel) and arrival within the rx timeout. Faults never
    raise; they increment the consecutive-fault count.
    """
    if frame.crc != crc8(frame.protected_bytes()):
        # content is untrusted: no counter resync, no freshness credit
        return Verdict.CRC_FAULT, replace(state, consecutive_faults=state.consecutive_faults + 1)
    if state.last_counter is not None and frame.counter != (state.last_counter + 1) % 256:
        # replay or skip; resync the counter so a following good frame is Ok
        return Verdict.COUNTER_FAULT, replace(state, consecutive_faults=state.consecutive_faults + 1,
                                              last_counter=frame.counter, last_rx_time=now)
    if now - state.last_rx_time >= state.rx_timeout:
        # valid frame after a silent gap: faulted, but the stream is back
        return Verdict.TIMEOUT, replace(state, consecutive_faults=state.consecutive_faults + 1,
                                        last_counter=frame.counter, last_rx_time=now)
    return Verdict.OK, replace(state, consecutive_faults=0,
                               last_counter=frame.counter, last_rx_time=now)


class GatewayMode(Enum):
    MANUAL_DRIVE = "ManualDrive"
    EXTERNAL_CONTROL = "ExternalControl"
    FALLBACK_LIMITED = "FallbackLimited"
    EMERGENCY_STOP = "EmergencyStop"


class RequestSource(Enum):
    DRIVER = "Driver"
    SDS = "SDS"
    BENCH = "Bench"


def set_mode(current: GatewayMode, request: GatewayMode, source: RequestSource,
             *, vehicle_speed: float = 0.0, handover_speed: float = 1.0) -> GatewayMode:
    """Apply a mode request; raises IllegalTransition when rejected.

    Driver override wins everywhere except the latched emergency stop;
    the SDS may take over only from manual drive near standstill; the
    bench can force the emergency stop from anywhere and is the only one
    able to reset it.
    """
    if source is RequestSource.BENCH:
        if request is GatewayMode.EMERGENCY_STOP:
            return GatewayMode.EMERGENCY_STOP
        if request is GatewayMode.MANUAL_DRIVE and current is GatewayMode.EMERGENCY_STOP:
            return GatewayMode.MANUAL_DRIVE
        raise IllegalTransition(f"bench cannot request {request.value} from {current.value}")
    if current is GatewayMode.EMERGENCY_STOP:
        raise IllegalTransition("emergency stop is latched until bench reset")
    if source is RequestSource.DRIVER:
        if request is GatewayMode.MANUAL_DRIVE:
            return GatewayMode.MANUAL_DRIVE
        raise IllegalTransition(f"driver can only request manual drive, not {request.value}")
    if source is RequestSource.SDS:
        if (request is GatewayMode.EXTERNAL_CONTROL
                and current is GatewayMode.MANUAL_DRIVE
                and vehicle_speed < handover_speed):
            return GatewayMode.EXTERNAL_CONTROL
        raise IllegalTransition(
            f"SDS request {request.value} rejected from {current.value} at {vehicle_speed} m/s")
    raise IllegalTransition(f"unknown source {source}")


@dataclass(frozen=True)
class ArbitrationResult:
    active: Optional[Channel]
    mode: GatewayMode


def arbitrate(primary: ChannelState, secondary: ChannelState, mode: GatewayMode,
              now: float) -> ArbitrationResult:
    """Pick the active control channel and the resulting operating mode."""
    if mode is GatewayMode.EMERGENCY_STOP:
        return ArbitrationResult(None, mode)
    if primary.alive(now):
        out = GatewayMode.EXTERNAL_CONTROL if mode is GatewayMode.FALLBACK_LIMITED else mode
        return ArbitrationResult(Channel.PRIMARY, out)
    if secondary.alive(now):
        return ArbitrationResult(Channel.SECONDARY, GatewayMode.FALLBACK_LIMITED)
    return ArbitrationResult(None, GatewayMode.EMERGENCY_STOP)


# -- control command payload codec (doubles are bit-exact across the wire) --

_CMD_STRUCT = struct.Struct("<dddBId")
_TURN_CODE = {TurnSignal.OFF: 0, TurnSignal.LEFT: 1, TurnSignal.RIGHT: 2, TurnSignal.HAZARD: 3}
_TURN_FROM = {v: k for k, v in _TURN_CODE.items()}


def pack_command(cmd: ControlCommand) -> bytes:
    return _CMD_STRUCT.pack(cmd.throttle, cmd.brake, cmd.steer,
                            _TURN_CODE[cmd.turn_signal], cmd.seq & 0xFFFFFFFF, cmd.issued_at)


def unpack_command(payload: bytes, *, max_steer: float) -> ControlCommand:
    """Decode and validate a command payload; raises ValueError on any
    out-of-range or non-finite field."""
    throttle, brake, steer, turn, seq, issued_at = _CMD_STRUCT.unpack(payload)
    if not (math.isfinite(steer) and abs(steer) <= max_steer + 1e-12):
        raise ValueError(f"steer out of range: {steer}")
    if turn not in _TURN_FROM:
        raise ValueError(f"bad turn signal code {turn}")
    return ControlCommand(throttle=throttle, brake=brake, steer=steer,
                          turn_signal=_TURN_FROM[turn], issued_at=issued_at, seq=seq)


@dataclass(frozen=True)
class GatewayConfig:
    rx_timeout: float = 0.100
    fault_threshold: int = 3
    fallback_throttle_cap: float = 0.3
    fallback_steer_fraction: float = 0.5   # of max_steer
    handover_speed: float = 1.0            # m/s
    max_steer: float = 0.5


@dataclass(frozen=True)
class GatewayEvent:
    time: float
    kind: str
    detail: str = ""


class Gateway:
    """The full gateway state machine, one instance per run.

    Feed it received frames and ask for the effective command once per
    control cycle; it tracks both channel states, arbitration, mode and a
    log of mode/fault events. Virtual-time driven, hence deterministic.
    """

    def __init__(self, config: GatewayConfig = GatewayConfig(), *, start_time: float = 0.0,
                 mode: GatewayMode = GatewayMode.EXTERNAL_CONTROL):
        self.config = config
        self.mode = mode
        self.channels = {
            Channel.PRIMARY: ChannelState(Channel.PRIMARY, last_rx_time=start_time,
                                          fault_threshold=config.fault_threshold,
                                          rx_timeout=config.rx_timeout),
            Channel.SECONDARY: ChannelState(Channel.SECONDARY, last_rx_time=start_time,
                                            fault_threshold=config.fault_threshold,
                                            rx_timeout=config.rx_timeout),
        }
        self.last_command: dict[Channel, Optional[ControlCommand]] = {
            Channel.PRIMARY: None, Channel.SECONDARY: None}
        self.active_channel: Optional[Channel] = Channel.PRIMARY
        self.held_steer = 0.0
        self.events: list[GatewayEvent] = []
        self.suppressed_commands = 0

    def _log(self, now: float, kind: str, detail: str = "") -> None:
        self.events.append(GatewayEvent(now, kind, detail))

    def receive_control_frame(self, frame: E2EFrame, now: float) -> Verdict:
        """Ingest one control-command frame from either channel."""
        if frame.data_id == DATA_ID_CONTROL_PRIMARY:
            channel = Channel.PRIMARY
        elif frame.data_id == DATA_ID_CONTROL_SECONDARY:
            channel = Channel.SECONDARY
        else:
            raise ValueError(f"not a control data id: {frame.data_id:#06x}")
        verdict, state = decode_and_check(frame, self.channels[channel], now)
        if verdict in (Verdict.OK, Verdict.TIMEOUT):
            try:
                cmd = unpack_command(frame.payload, max_steer=self.config.max_steer)
            except (ValueError, struct.error) as exc:
                # value inspection failed: drop the command, count a fault
                state = replace(state, consecutive_faults=state.consecutive_faults + 1)
                self._log(now, "invalid_command", f"{channel.value}: {exc}")
                cmd = None
            if cmd is not None:
                if self.mode is GatewayMode.EMERGENCY_STOP:
                    self.suppressed_commands += 1
                    self._log(now, "command_suppressed", channel.value)
                else:
                    self.last_command[channel] = cmd
        if verdict is not Verdict.OK:
            self._log(now, "channel_fault", f"{channel.value}: {verdict.value}")
        self.channels[channel] = state
        return verdict

    def request_mode(self, request: GatewayMode, source: RequestSource, now: float,
                     vehicle_speed: float = 0.0) -> bool:
        """Apply a mode request; returns False (and logs) when rejected."""
        try:
            new_mode = set_mode(self.mode, request, source, vehicle_speed=vehicle_speed,
                                handover_speed=self.config.handover_speed)
        except IllegalTransition as exc:
            self._log(now, "illegal_transition", str(exc))
            return False
        if new_mode is not self.mode:
            self._log(now, "mode_change", f"{self.mode.value}->{new_mode.value} ({source.value})")
            self.mode = new_mode
        return True

    def emergency_stop(self, now: float, reason: str = "bench") -> None:
        if self.mode is not GatewayMode.EMERGENCY_STOP:
            self._log(now, "mode_change", f"{self.mode.value}->EmergencyStop ({reason})")
        self.mode = GatewayMode.EMERGENCY_STOP

    def control_cycle(self, now: float) -> Optional[ControlCommand]:
        """Arbitrate channels and produce the command forwarded to dynamics.

        Returns None in manual drive (driver inputs bypass the SDS channels).
        """
        if self.mode is GatewayMode.MANUAL_DRIVE:
            return None
        result = arbitrate(self.channels[Channel.PRIMARY], self.channels[Channel.SECONDARY],
                           self.mode, now)
        if result.mode is not self.mode:
            self._log(now, "mode_change", f"{self.mode.value}->{result.mode.value} (arbitration)")
            self.mode = result.mode
        if result.active is not self.active_channel:
            self._log(now, "channel_switch",
                      f"{self.active_channel.value if self.active_channel else 'none'}->"
                      f"{result.active.value if result.active else 'none'}")
            self.active_channel = result.active

        if self.mode is GatewayMode.EMERGENCY_STOP or result.active is None:
            return ControlCommand(throttle=0.0, brake=1.0, steer=self.held_steer,
                                  turn_signal=TurnSignal.HAZARD, issued_at=now)

        cmd = self.last_command[result.active]
        if cmd is None:
            cmd = ControlCommand(issued_at=now)
        if self.mode is GatewayMode.FALLBACK_LIMITED:
            cmd = self._apply_fallback_caps(cmd)
        self.held_steer = cmd.steer
        return cmd

    def _apply_fallback_caps(self, cmd: ControlCommand) -> ControlCommand:
        steer_cap = self.config.fallback_steer_fraction * self.config.max_steer
        return replace(cmd,
                       throttle=min(cmd.throttle, self.config.fallback_throttle_cap),
                       steer=min(max(cmd.steer, -steer_cap), steer_cap))
