"""Length-prefixed JSON wire protocol between stage processes.

Every message is a JSON object with a "t" discriminator, preceded by a
32-bit little-endian byte length. E2E frame bytes travel as hex strings so
the protected layer stays bit-exact through the JSON envelope.
"""

from __future__ import annotations

import json
import socket
import struct
from typing import Optional

from .command import ControlCommand, TurnSignal
from .dynamics import EgoVehicleState
from .errors import ProtocolViolation
from .geometry import Pose2D
from .sensors import DetectedObject, Detection, ObjectClass

MSG_HELLO = "Hello"
MSG_TICK_STATE = "TickState"
MSG_DETECTION = "Detection"
MSG_CONTROL_REPLY = "ControlReply"
MSG_GATEWAY_FRAME = "GatewayFrame"
MSG_MODE_EVENT = "ModeEvent"
MSG_BYE = "Bye"

_LEN = struct.Struct("<I")
MAX_MESSAGE = 16 * 1024 * 1024


def send_msg(sock: socket.socket, msg: dict) -> None:
    data = json.dumps(msg, separators=(",", ":")).encode("utf-8")
    sock.sendall(_LEN.pack(len(data)) + data)


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


def recv_msg(sock: socket.socket) -> Optional[dict]:
    """One message, or None on orderly EOF."""
    header = _recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_MESSAGE:
        raise ProtocolViolation(f"message of {length} bytes exceeds limit")
    body = _recv_exact(sock, length)
    if body is None:
        raise ProtocolViolation("connection closed mid-message")
    try:
        msg = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"message is not valid JSON: {exc}") from exc
    if not isinstance(msg, dict) or "t" not in msg:
        raise ProtocolViolation("message missing type discriminator")
    return msg


def expect(msg: Optional[dict], msg_type: str) -> dict:
    if msg is None:
        raise ProtocolViolation(f"peer closed while waiting for {msg_type}")
    if msg["t"] != msg_type:
        raise ProtocolViolation(f"expected {msg_type}, got {msg['t']}")
    return msg


# -- payload codecs ---------------------------------------------------------

def command_to_json(cmd: ControlCommand) -> dict:
    return {"throttle": cmd.throttle, "brake": cmd.brake, "steer": cmd.steer,
            "turn_signal": cmd.turn_signal.value, "issued_at": cmd.issued_at, "seq": cmd.seq}


def command_from_json(doc: dict) -> ControlCommand:
    return ControlCommand(throttle=doc["throttle"], brake=doc["brake"], steer=doc["steer"],
                          turn_signal=TurnSignal(doc["turn_signal"]),
                          issued_at=doc["issued_at"], seq=doc["seq"])


def ego_to_json(ego: EgoVehicleState) -> dict:
    return {"x": ego.pose.x, "y": ego.pose.y, "heading": ego.pose.heading,
            "speed": ego.speed, "accel": ego.accel, "steer": ego.steer,
            "gear": ego.gear.value}


def ego_from_json(doc: dict) -> EgoVehicleState:
    from .command import Gear
    return EgoVehicleState(pose=Pose2D(doc["x"], doc["y"], doc["heading"]),
                           speed=doc["speed"], accel=doc["accel"], steer=doc["steer"],
                           gear=Gear(doc["gear"]))


def detection_to_json(det: Detection) -> dict:
    return {
        "frame_id": det.frame_id,
        "capture_time": det.capture_time,
        "delivery_time": det.delivery_time,
        "wall_capture_time": det.wall_capture_time,
        "wall_delivery_time": det.wall_delivery_time,
        "objects": [{"object_class": o.object_class.value, "distance": o.distance,
                     "lateral_offset": o.lateral_offset, "confidence": o.confidence}
                    for o in det.objects],
    }


def detection_from_json(doc: dict) -> Detection:
    return Detection(
        frame_id=doc["frame_id"],
        capture_time=doc["capture_time"],
        delivery_time=doc["delivery_time"],
        wall_capture_time=doc.get("wall_capture_time"),
        wall_delivery_time=doc.get("wall_delivery_time"),
        objects=tuple(DetectedObject(ObjectClass(o["object_class"]), o["distance"],
                                     o["lateral_offset"], o.get("confidence", 1.0))
                      for o in doc["objects"]),
    )
