"""Length-prefixed JSON framing and payload codecs."""

import socket
import threading

import pytest

from vilbench.command import ControlCommand, TurnSignal
from vilbench.dynamics import EgoVehicleState
from vilbench.errors import ProtocolViolation
from vilbench.geometry import Pose2D
from vilbench.protocol import (command_from_json, command_to_json, detection_from_json,
                               detection_to_json, ego_from_json, ego_to_json, expect,
                               recv_msg, send_msg)
from vilbench.sensors import DetectedObject, Detection, ObjectClass


@pytest.fixture
def sock_pair():
    a, b = socket.socketpair()
    yield a, b
    a.close()
    b.close()


class TestFraming:
    def test_roundtrip(self, sock_pair):
        a, b = sock_pair
        send_msg(a, {"t": "TickState", "tick": 3, "time": 0.06})
        msg = recv_msg(b)
        assert msg == {"t": "TickState", "tick": 3, "time": 0.06}

    def test_multiple_messages_in_order(self, sock_pair):
        a, b = sock_pair
        for k in range(5):
            send_msg(a, {"t": "Detection", "frame_id": k})
        assert [recv_msg(b)["frame_id"] for _ in range(5)] == list(range(5))

    def test_eof_returns_none(self, sock_pair):
        a, b = sock_pair
        a.close()
        assert recv_msg(b) is None

    def test_missing_discriminator(self, sock_pair):
        a, b = sock_pair
        send_msg(a, {"x": 1})
        with pytest.raises(ProtocolViolation):
            recv_msg(b)

    def test_truncated_message(self, sock_pair):
        a, b = sock_pair
        import struct
        a.sendall(struct.pack("<I", 100) + b"{}")
        a.close()
        with pytest.raises(ProtocolViolation):
            recv_msg(b)

    def test_expect_type_mismatch(self):
        with pytest.raises(ProtocolViolation):
            expect({"t": "Bye"}, "TickState")
        with pytest.raises(ProtocolViolation):
            expect(None, "TickState")


class TestCodecs:
    def test_command_float_bit_exact(self):
        cmd = ControlCommand(throttle=0.1 + 0.2, brake=1e-17, steer=-0.123456789012345,
                             turn_signal=TurnSignal.LEFT, issued_at=1234.56789, seq=42)
        back = command_from_json(command_to_json(cmd))
        assert back == cmd  # dataclass equality is exact float equality

    def test_ego_roundtrip(self):
        ego = EgoVehicleState(pose=Pose2D(1.5, -2.25, 0.7), speed=13.89, accel=-0.4,
                              steer=0.05)
        assert ego_from_json(ego_to_json(ego)) == ego

    def test_detection_roundtrip(self):
        det = Detection(
            frame_id=9, capture_time=1.8, delivery_time=1.85,
            wall_capture_time=1700000000.123,
            objects=(DetectedObject(ObjectClass.PERSON, 14.75, -0.5, 0.9),
                     DetectedObject(ObjectClass.VEHICLE, 33.25, 0.25)))
        assert detection_from_json(detection_to_json(det)) == det
