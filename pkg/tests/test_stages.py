"""External and ViL stages: lockstep equivalence, redundancy, fault paths."""

import json
import socket
import threading

import pytest

from vilbench import protocol as proto
from vilbench.errors import PeerUnreachable, ProtocolViolation
from vilbench.harness import run_scenario
from vilbench.scenario import (ScenarioEvent, Stage, StageConfig, acc_lka_scenario,
                               emergency_brake_scenario)

STRAIGHT_ACC = dict(map_name="straight_1km", duration=6.0)


def stage(kind, **kw):
    return StageConfig(stage=kind, **kw)


class TestExternalStage:
    def test_lockstep_matches_internal_exactly(self):
        sc = acc_lka_scenario(**STRAIGHT_ACC)
        internal = run_scenario(sc, stage(Stage.INTERNAL))
        external = run_scenario(sc, stage(Stage.EXTERNAL))
        assert internal.row_lines() == external.row_lines()

    def test_free_running_completes(self):
        sc = acc_lka_scenario(map_name="straight_1km", duration=3.0)
        log = run_scenario(sc, stage(Stage.EXTERNAL, lockstep=False))
        assert len(log.rows) == 150
        assert log.terminated is None
        # commands did flow: the ego launched from rest
        assert log.rows[-1].speed > 0.0

    def test_transport_delay_shifts_commands(self):
        sc = acc_lka_scenario(**STRAIGHT_ACC)
        delayed = run_scenario(sc, stage(Stage.EXTERNAL, injected_transport_delay=0.04))
        undelayed = run_scenario(sc, stage(Stage.EXTERNAL))
        # with a 2-tick command delay the first nonzero throttle appears later
        first_d = next(r.tick for r in delayed.rows if r.throttle > 0)
        first_u = next(r.tick for r in undelayed.rows if r.throttle > 0)
        assert first_d == first_u + 2

    def test_emergency_brake_latency_matches_internal(self):
        sc = emergency_brake_scenario(appear_time=3.0, duration=6.0)
        internal = run_scenario(sc, stage(Stage.INTERNAL))
        external = run_scenario(sc, stage(Stage.EXTERNAL))
        li = internal.latency_records[0]
        le = external.latency_records[0]
        assert li.latency_capture_to_brake == le.latency_capture_to_brake


class TestVilStage:
    def test_vil_runs_with_gateway_in_loop(self):
        sc = acc_lka_scenario(**STRAIGHT_ACC)
        log = run_scenario(sc, stage(Stage.VIL))
        assert len(log.rows) == 300
        assert {r.mode for r in log.rows} == {"ExternalControl"}
        # E2E path carries bit-exact commands: physics equals internal
        internal = run_scenario(sc, stage(Stage.INTERNAL))
        assert [(r.x, r.speed) for r in internal.rows] == [(r.x, r.speed) for r in log.rows]

    def test_kill_primary_switches_to_fallback(self):
        sc = acc_lka_scenario(map_name="straight_1km", duration=8.0)
        cfg = stage(Stage.VIL, kill_primary_at=4.0)
        log = run_scenario(sc, cfg)
        switch = next(r for r in log.rows if r.mode == "FallbackLimited")
        # no control gap beyond rx_timeout + one tick
        assert switch.time - 4.0 <= 0.100 + 0.020 + 1e-9
        assert len(log.rows) == 400  # not a single missed control cycle
        assert any(e.kind == "channel_switch" for e in log.events)
        # fallback caps hold on every forwarded command afterwards
        after = [r for r in log.rows if r.mode == "FallbackLimited"]
        assert after
        for r in after:
            assert r.throttle <= 0.3 + 1e-12
            assert abs(r.steer) <= 0.25 + 1e-9

    def test_kill_both_emergency_stops_and_halts(self):
        sc = acc_lka_scenario(map_name="straight_1km", duration=10.0)
        cfg = stage(Stage.VIL, kill_primary_at=4.0, kill_secondary_at=4.0)
        log = run_scenario(sc, cfg)
        stop_rows = [r for r in log.rows if r.mode == "EmergencyStop"]
        assert stop_rows
        engage = stop_rows[0]
        assert engage.time - 4.0 <= 0.100 + 0.020 + 1e-9
        import math
        bound_ticks = math.ceil(engage.speed / 8.0 / 0.02)
        stopped = next(r for r in log.rows if r.time > engage.time and r.speed == 0.0)
        assert stopped.time - engage.time <= bound_ticks * 0.02 * 1.1
        assert all(r.brake == 1.0 for r in stop_rows)

    def test_emergency_brake_under_fallback(self):
        """Primary channel killed before the pedestrian appears: the run
        completes in FallbackLimited, and the emergency brake still brakes
        at full force (the fallback caps limit throttle, never brake)."""
        sc = emergency_brake_scenario(appear_time=6.0, appear_distance=20.0, duration=10.0)
        log = run_scenario(sc, stage(Stage.VIL, kill_primary_at=2.0))
        assert log.terminated is None
        assert len(log.rows) == 500
        assert any(e.kind == "channel_switch" for e in log.events)
        braking = [r for r in log.rows if r.eb_status == "Braking"]
        assert braking
        assert braking[0].mode == "FallbackLimited"
        assert braking[0].brake == 1.0
        assert log.rows[-1].speed == 0.0

    def test_estop_event_via_gateway(self):
        sc = acc_lka_scenario(map_name="straight_1km", duration=8.0,
                              events=(ScenarioEvent(4.0, "estop"),))
        log = run_scenario(sc, stage(Stage.VIL))
        stop_rows = [r for r in log.rows if r.mode == "EmergencyStop"]
        assert stop_rows
        assert stop_rows[0].time == pytest.approx(4.0, abs=0.05)
        assert log.rows[-1].speed == 0.0
        assert any(e.kind == "mode_change" and "EmergencyStop" in e.detail
                   for e in log.events)


class TestGatewayServer:
    """Drive the gateway peer loop directly over a socket pair."""

    def run_gateway(self, exchanges):
        from vilbench.remote import serve_gateway
        from vilbench.scenario import scenario_to_json

        world, gw_sock = socket.socketpair()
        hello = {"scenario": scenario_to_json(acc_lka_scenario(**STRAIGHT_ACC))}
        worker = threading.Thread(target=serve_gateway, args=(gw_sock, hello), daemon=True)
        worker.start()
        replies = exchanges(world)
        proto.send_msg(world, {"t": proto.MSG_BYE})
        worker.join(timeout=10)
        world.close()
        gw_sock.close()
        return replies

    def tick_exchange(self, world, tick, now):
        proto.send_msg(world, {"t": proto.MSG_TICK_STATE, "tick": tick, "time": now,
                               "ego": {"x": 0, "y": 0, "heading": 0, "speed": 0,
                                       "accel": 0, "steer": 0, "gear": "Drive"}})
        events = []
        while True:
            msg = proto.recv_msg(world)
            if msg["t"] == proto.MSG_MODE_EVENT:
                events.append(msg)
                continue
            return msg, events

    def test_mode_request_frame_manual_override(self):
        """A Driver->ManualDrive request over an 0x0300 E2E frame is honored;
        the SDS command path idles afterwards."""
        from vilbench.gateway import DATA_ID_MODE_REQUEST, encode_frame
        from vilbench.remote import pack_mode_request
        from vilbench.gateway import GatewayMode, RequestSource

        def exchanges(world):
            reply, _ = self.tick_exchange(world, 0, 0.0)
            assert reply["mode"] == "ExternalControl"
            frame = encode_frame(DATA_ID_MODE_REQUEST, 0,
                                 pack_mode_request(GatewayMode.MANUAL_DRIVE,
                                                   RequestSource.DRIVER))
            proto.send_msg(world, {"t": proto.MSG_GATEWAY_FRAME, "tick": 1,
                                   "frame": frame.to_bytes().hex()})
            reply, events = self.tick_exchange(world, 1, 0.02)
            assert reply["mode"] == "ManualDrive"
            assert any("ManualDrive" in e.get("detail", "") for e in events)
            # SDS path idles: the reply command is all zeros
            assert reply["command"]["throttle"] == 0.0
            assert reply["command"]["brake"] == 0.0
            return reply

        self.run_gateway(exchanges)

    def test_corrupt_bench_frame_ignored(self):
        from vilbench.gateway import DATA_ID_EMERGENCY_STOP, encode_frame

        def exchanges(world):
            frame = encode_frame(DATA_ID_EMERGENCY_STOP, 0, b"\x01")
            raw = bytearray(frame.to_bytes())
            raw[-1] ^= 0xFF  # break the CRC
            proto.send_msg(world, {"t": proto.MSG_GATEWAY_FRAME, "tick": 0,
                                   "frame": bytes(raw).hex()})
            reply, _ = self.tick_exchange(world, 0, 0.0)
            assert reply["mode"] == "ExternalControl"  # corrupt stop ignored
            return reply

        self.run_gateway(exchanges)


class TestProtocolFaults:
    def test_unreachable_peer(self):
        sc = acc_lka_scenario(map_name="straight_1km", duration=1.0)
        cfg = stage(Stage.EXTERNAL, endpoints={"cecas": "127.0.0.1:1"})
        with pytest.raises(PeerUnreachable):
            run_scenario(sc, cfg)

    def test_out_of_lockstep_reply_is_protocol_violation(self):
        """A fake car server answering with the wrong tick must be rejected."""
        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]

        def bad_cecas():
            conn, _ = server.accept()
            proto.send_msg(conn, {"t": proto.MSG_HELLO, "role": "cecas"})
            proto.recv_msg(conn)  # world hello
            while True:
                msg = proto.recv_msg(conn)
                if msg is None or msg["t"] == proto.MSG_BYE:
                    break
                if msg["t"] == proto.MSG_TICK_STATE:
                    proto.send_msg(conn, {
                        "t": proto.MSG_CONTROL_REPLY, "tick": msg["tick"] + 7,
                        "command": {"throttle": 0, "brake": 0, "steer": 0,
                                    "turn_signal": "Off", "issued_at": 0, "seq": 0},
                        "eb_status": "Normal", "eb_trigger_time": None,
                        "eb_trigger_frame": None})
            conn.close()

        t = threading.Thread(target=bad_cecas, daemon=True)
        t.start()
        sc = acc_lka_scenario(map_name="straight_1km", duration=1.0)
        cfg = stage(Stage.EXTERNAL, endpoints={"cecas": f"127.0.0.1:{port}"})
        with pytest.raises(ProtocolViolation):
            run_scenario(sc, cfg)
        server.close()
