"""Child-process entrypoints for the external and ViL stages.

Each peer dials the world process, identifies its role in a Hello, receives
the scenario, then serves lockstep tick exchanges until Bye. All timing is
virtual (carried in the messages), so remote runs stay deterministic.
"""

from __future__ import annotations

import argparse
import socket
import struct
import sys

from . import protocol as proto
from .cecas import CentralCarServer
from .command import ControlCommand
from .gateway import (DATA_ID_CONTROL_PRIMARY, DATA_ID_CONTROL_SECONDARY,
                      DATA_ID_EMERGENCY_STOP, DATA_ID_MODE_REQUEST, DATA_ID_VEHICLE_STATE,
                      ChannelState, E2EFrame, Gateway, GatewayMode, RequestSource, Verdict,
                      decode_and_check, encode_frame, pack_command)
from .geometry import load_map
from .scenario import scenario_from_json


def _reply_telemetry(tick: int, telemetry) -> dict:
    return {
        "t": proto.MSG_CONTROL_REPLY,
        "tick": tick,
        "command": proto.command_to_json(telemetry.command),
        "eb_status": telemetry.eb_status.value,
        "eb_trigger_time": telemetry.eb_trigger_time,
        "eb_trigger_frame": telemetry.eb_trigger_frame,
    }


def serve_cecas(sock: socket.socket, hello: dict) -> None:
    scenario = scenario_from_json(hello["scenario"])
    path = load_map(hello["map_src"])
    vil = hello.get("mode") == "vil"
    server = CentralCarServer(path, scenario.vehicle, scenario.acc, scenario.lka,
                              eb_trigger_distance=scenario.eb_trigger_distance,
                              plan_horizon=scenario.plan_horizon)
    counters = {DATA_ID_CONTROL_PRIMARY: 0, DATA_ID_CONTROL_SECONDARY: 0}
    expected_tick = 0
    while True:
        msg = proto.recv_msg(sock)
        if msg is None or msg["t"] == proto.MSG_BYE:
            break
        if msg["t"] == proto.MSG_DETECTION:
            server.deliver(proto.detection_from_json(msg))
        elif msg["t"] == proto.MSG_MODE_EVENT and msg.get("kind") == "reset_emergency_brake":
            server.reset_emergency_brake()
        elif msg["t"] == proto.MSG_TICK_STATE:
            tick = msg["tick"]
            if tick != expected_tick:
                raise proto.ProtocolViolation(f"tick {tick} out of order, expected {expected_tick}")
            expected_tick += 1
            telemetry = server.control_cycle(msg["time"], proto.ego_from_json(msg["ego"]))
            if vil:
                for data_id in (DATA_ID_CONTROL_PRIMARY, DATA_ID_CONTROL_SECONDARY):
                    frame = encode_frame(data_id, counters[data_id],
                                         pack_command(telemetry.command))
                    counters[data_id] = (counters[data_id] + 1) % 256
                    proto.send_msg(sock, {"t": proto.MSG_GATEWAY_FRAME, "tick": tick,
                                          "frame": frame.to_bytes().hex()})
            proto.send_msg(sock, _reply_telemetry(tick, telemetry))
        else:
            raise proto.ProtocolViolation(f"unexpected message {msg['t']} at cecas")
    proto.send_msg(sock, {"t": proto.MSG_BYE})


def serve_gateway(sock: socket.socket, hello: dict) -> None:
    scenario = scenario_from_json(hello["scenario"])
    gw = Gateway(scenario.gateway, mode=GatewayMode.EXTERNAL_CONTROL)
    bench = {
        DATA_ID_VEHICLE_STATE: ChannelState(None, rx_timeout=float("inf")),
        DATA_ID_MODE_REQUEST: ChannelState(None, rx_timeout=float("inf")),
        DATA_ID_EMERGENCY_STOP: ChannelState(None, rx_timeout=float("inf")),
    }
    vehicle_speed = 0.0
    now = 0.0
    sent_events = 0
    expected_tick = 0
    while True:
        msg = proto.recv_msg(sock)
        if msg is None or msg["t"] == proto.MSG_BYE:
            break
        if msg["t"] == proto.MSG_GATEWAY_FRAME:
            frame = E2EFrame.from_bytes(bytes.fromhex(msg["frame"]))
            if frame.data_id in (DATA_ID_CONTROL_PRIMARY, DATA_ID_CONTROL_SECONDARY):
                gw.receive_control_frame(frame, now)
            elif frame.data_id in bench:
                verdict, bench[frame.data_id] = _check_bench_frame(frame, bench[frame.data_id])
                if verdict is Verdict.CRC_FAULT:
                    continue
                if frame.data_id == DATA_ID_EMERGENCY_STOP:
                    gw.emergency_stop(now, reason="Bench")
                elif frame.data_id == DATA_ID_MODE_REQUEST:
                    mode, source = _unpack_mode_request(frame.payload)
                    gw.request_mode(mode, source, now, vehicle_speed)
                elif frame.data_id == DATA_ID_VEHICLE_STATE:
                    now, vehicle_speed = struct.unpack("<dd", frame.payload)
        elif msg["t"] == proto.MSG_TICK_STATE:
            tick = msg["tick"]
            if tick != expected_tick:
                raise proto.ProtocolViolation(f"tick {tick} out of order, expected {expected_tick}")
            expected_tick += 1
            now = msg["time"]
            cmd = gw.control_cycle(now)
            if cmd is None:
                # manual drive: the SDS path idles, the driver actuates directly
                cmd = ControlCommand(issued_at=now)
            for ev in gw.events[sent_events:]:
                proto.send_msg(sock, {"t": proto.MSG_MODE_EVENT, "time": ev.time,
                                      "kind": ev.kind, "detail": ev.detail})
            sent_events = len(gw.events)
            proto.send_msg(sock, {
                "t": proto.MSG_CONTROL_REPLY, "tick": tick,
                "command": proto.command_to_json(cmd),
                "mode": gw.mode.value,
            })
        else:
            raise proto.ProtocolViolation(f"unexpected message {msg['t']} at gateway")
    proto.send_msg(sock, {"t": proto.MSG_BYE})


def _check_bench_frame(frame: E2EFrame, state: ChannelState):
    return decode_and_check(frame, state, now=state.last_rx_time)


_MODE_CODE = {m: i for i, m in enumerate(GatewayMode)}
_SOURCE_CODE = {s: i for i, s in enumerate(RequestSource)}


def pack_mode_request(mode: GatewayMode, source: RequestSource) -> bytes:
    return bytes([_MODE_CODE[mode], _SOURCE_CODE[source]])


def _unpack_mode_request(payload: bytes) -> tuple[GatewayMode, RequestSource]:
    modes = list(GatewayMode)
    sources = list(RequestSource)
    return modes[payload[0]], sources[payload[1]]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vilbench.remote")
    parser.add_argument("--role", required=True, choices=["cecas", "gateway"])
    parser.add_argument("--connect", help="world address host:port")
    parser.add_argument("--listen", type=int, help="serve one world connection on this port")
    args = parser.parse_args(argv)

    if args.connect:
        host, _, port = args.connect.rpartition(":")
        sock = socket.create_connection((host, int(port)), timeout=15.0)
    elif args.listen is not None:
        server = socket.create_server(("127.0.0.1", args.listen))
        sock, _ = server.accept()
        server.close()
    else:
        parser.error("need --connect or --listen")
    sock.settimeout(None)

    proto.send_msg(sock, {"t": proto.MSG_HELLO, "role": args.role})
    hello = proto.expect(proto.recv_msg(sock), proto.MSG_HELLO)
    try:
        if args.role == "cecas":
            serve_cecas(sock, hello)
        else:
            serve_gateway(sock, hello)
    finally:
        sock.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
