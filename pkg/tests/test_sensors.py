"""Camera stream timing, ground-truth detection, mailbox hold rule, cadences."""

import math
from fractions import Fraction

import numpy as np
import pytest

from vilbench.dynamics import EgoVehicleState, VehicleParams
from vilbench.geometry import Pose2D, builtin_map
from vilbench.sensors import (CameraConfig, CameraStream, DetectedObject, Detection,
                              ObjectClass, PerceptionMailbox, Scheduler, SignalClass,
                              capture_frame, next_capture_time, select_perception,
                              tick_cadence)
from vilbench.worldcore import ActorKind, WorldState, spawn_ahead


@pytest.fixture
def params():
    return VehicleParams()


def world_with(kind, ahead, params=None):
    path = builtin_map("straight_1km")
    w = WorldState(ego=EgoVehicleState(pose=Pose2D(0, 0, 0)))
    return spawn_ahead(w, kind, ahead, 0.0, path=path)


class TestCaptureTiming:
    def test_frame_zero(self):
        assert next_capture_time(0, CameraConfig(fps=5)) == 0.0

    def test_exact_division(self):
        assert next_capture_time(10, CameraConfig(fps=5)) == 2.0

    def test_no_accumulation_drift(self):
        cfg = CameraConfig(fps=5)
        # oracle: exact rational n / fps
        for n in (1, 999, 10_000, 1_000_000):
            exact = Fraction(n, 5)
            assert abs(next_capture_time(n, cfg) - float(exact)) < 1e-6
        assert next_capture_time(1_000_000, cfg) == 200000.0

    def test_fractional_fps(self):
        cfg = CameraConfig(fps=3)
        for n in (1, 3, 1000, 333_333):
            assert abs(next_capture_time(n, cfg) - n / 3) < 1e-9

    def test_negative_frame_rejected(self):
        with pytest.raises(ValueError):
            next_capture_time(-1, CameraConfig())


class TestCaptureFrame:
    def test_noiseless_person_distance(self, params):
        w = world_with(ActorKind.PEDESTRIAN, 15.0)
        det = capture_frame(w, CameraConfig(), np.random.default_rng(0), params,
                            frame_id=0, capture_time=0.0)
        assert det is not None
        assert len(det.objects) == 1
        obj = det.objects[0]
        assert obj.object_class is ObjectClass.PERSON
        assert obj.distance == pytest.approx(15.0, abs=1e-9)
        assert obj.lateral_offset == pytest.approx(0.0, abs=1e-9)

    def test_out_of_range_excluded(self, params):
        w = world_with(ActorKind.PEDESTRIAN, 80.0)
        det = capture_frame(w, CameraConfig(range_m=60.0), np.random.default_rng(0), params,
                            frame_id=0, capture_time=0.0)
        assert det.objects == ()

    def test_behind_and_outside_frustum_excluded(self, params):
        path = builtin_map("straight_1km")
        w = WorldState(ego=EgoVehicleState(pose=Pose2D(50, 0, 0)))
        w = spawn_ahead(w, ActorKind.PEDESTRIAN, -10.0, 0.0, path=path)  # behind
        det = capture_frame(w, CameraConfig(), np.random.default_rng(0), params,
                            frame_id=0, capture_time=0.0)
        assert det.objects == ()
        # 45 deg frustum edge: lateral > longitudinal is outside
        from vilbench.worldcore import spawn_actor
        w2 = WorldState(ego=EgoVehicleState(pose=Pose2D(0, 0, 0)))
        w2 = spawn_actor(w2, ActorKind.PEDESTRIAN, Pose2D(10.0, 11.0), 0.0, path=path)
        det2 = capture_frame(w2, CameraConfig(), np.random.default_rng(0), params,
                             frame_id=0, capture_time=0.0)
        assert det2.objects == ()

    def test_vehicle_reports_bumper_gap(self, params):
        w = world_with(ActorKind.LEAD_VEHICLE, 50.0)
        det = capture_frame(w, CameraConfig(), np.random.default_rng(0), params,
                            frame_id=0, capture_time=0.0)
        obj = det.objects[0]
        assert obj.object_class is ObjectClass.VEHICLE
        expected = 50.0 - (params.front_overhang + params.rear_overhang)
        assert obj.distance == pytest.approx(expected, abs=1e-9)

    def test_noise_statistics(self, params):
        """Seeded statistical oracle: 10k frames of a fixed 20 m target."""
        w = world_with(ActorKind.PEDESTRIAN, 20.0)
        cfg = CameraConfig(distance_noise_std=0.5)
        rng = np.random.default_rng(1234)
        samples = []
        for i in range(10_000):
            det = capture_frame(w, cfg, rng, params, frame_id=i, capture_time=i * 0.2)
            samples.append(det.objects[0].distance)
        samples = np.array(samples)
        assert abs(samples.mean() - 20.0) < 0.02
        assert abs(samples.std() - 0.5) < 0.02

    def test_dropout_drops_whole_frames(self, params):
        w = world_with(ActorKind.PEDESTRIAN, 20.0)
        cfg = CameraConfig(dropout_prob=1.0)
        rng = np.random.default_rng(0)
        for i in range(50):
            assert capture_frame(w, cfg, rng, params, frame_id=i, capture_time=0.0) is None

    def test_delivery_includes_delays(self, params):
        w = world_with(ActorKind.PEDESTRIAN, 20.0)
        cfg = CameraConfig(processing_delay=0.05, extra_load_delay=0.08)
        det = capture_frame(w, cfg, np.random.default_rng(0), params,
                            frame_id=3, capture_time=1.0)
        assert det.delivery_time == pytest.approx(1.13, abs=1e-12)

    def test_detection_invariants(self):
        with pytest.raises(ValueError):
            Detection(frame_id=0, capture_time=1.0, delivery_time=0.5)
        with pytest.raises(ValueError):
            DetectedObject(ObjectClass.PERSON, distance=0.0, lateral_offset=0.0)
        with pytest.raises(ValueError):
            DetectedObject(ObjectClass.PERSON, distance=5.0, lateral_offset=0.0,
                           confidence=1.5)


def mk_detection(frame_id, capture, delivery):
    return Detection(frame_id=frame_id, capture_time=capture, delivery_time=delivery)


class TestSelectPerception:
    def test_hold_rule(self):
        box = PerceptionMailbox()
        first = mk_detection(0, 0.0, 0.05)
        second = mk_detection(1, 0.2, 0.25)
        box.deliver(first)
        box.deliver(second)
        assert select_perception(box, 0.20) is first

    def test_none_before_first_delivery(self):
        box = PerceptionMailbox()
        box.deliver(mk_detection(0, 0.0, 0.05))
        assert select_perception(box, 0.04) is None
        assert select_perception(PerceptionMailbox(), 100.0) is None

    def test_hold_count_oracle(self):
        """Deliveries every 0.2 s vs control every 0.02 s: each detection is
        selected for exactly 10 consecutive cycles in steady state."""
        box = PerceptionMailbox()
        for n in range(30):
            box.deliver(mk_detection(n, n / 5, n / 5 + 0.05))
        counts = {}
        k = 0
        while True:
            now = k * 0.02
            if now > 29 / 5 + 0.05:
                break
            det = select_perception(box, now)
            if det is not None:
                counts[det.frame_id] = counts.get(det.frame_id, 0) + 1
            k += 1
        steady = [counts[i] for i in sorted(counts) if 0 < i < 29]
        assert steady == [10] * len(steady)

    def test_monotone_in_now(self):
        rng = np.random.default_rng(9)
        box = PerceptionMailbox()
        t = 0.0
        for n in range(25):
            t += float(rng.uniform(0.01, 0.3))
            box.deliver(mk_detection(n, t - 0.01, t))
        last = -1
        for now in np.arange(0.0, t + 0.5, 0.013):
            det = select_perception(box, float(now))
            if det is not None:
                assert det.frame_id >= last
                last = det.frame_id

    def test_ring_capacity(self):
        box = PerceptionMailbox(capacity=4)
        for n in range(10):
            box.deliver(mk_detection(n, float(n), float(n)))
        assert len(box.history) == 4
        assert select_perception(box, 100.0).frame_id == 9


class TestCadence:
    def test_tick_zero_both_due(self):
        assert tick_cadence(0) == {SignalClass.CONTROL, SignalClass.COMFORT}

    def test_tick_three_nothing_due(self):
        assert tick_cadence(3) == frozenset()

    def test_counting_oracle_one_second(self):
        # 100 base ticks = 1 s at the 10 ms base period
        control = sum(SignalClass.CONTROL in tick_cadence(k) for k in range(100))
        comfort = sum(SignalClass.COMFORT in tick_cadence(k) for k in range(100))
        assert control == 50
        assert comfort == 20

    def test_scheduler_matches_tick_cadence(self):
        sched = Scheduler(0.020, 0.050)
        assert sched.base_period == pytest.approx(0.010)
        for k in range(1000):
            assert sched.due(k) == tick_cadence(k)

    def test_scheduler_other_periods(self):
        sched = Scheduler(0.010, 0.050)
        assert sched.base_period == pytest.approx(0.010)
        assert sched.control_every == 1
        assert sched.comfort_every == 5
        assert sched.base_ticks_for(10.0) == 1000


class TestCameraStream:
    def test_due_captures_progression(self):
        stream = CameraStream(CameraConfig(fps=5), seed=1)
        assert stream.due_captures(0.0) == [(0, 0.0)]
        assert stream.due_captures(0.39) == [(1, 0.2)]
        assert stream.due_captures(1.0) == [(2, 0.4), (3, 0.6), (4, 0.8), (5, 1.0)]
        assert stream.due_captures(1.0) == []

    def test_faster_than_tick_rate(self):
        # cameras faster than the 50 Hz tick must also be handled
        stream = CameraStream(CameraConfig(fps=100), seed=1)
        due = stream.due_captures(0.02)
        assert [f for f, _ in due] == [0, 1, 2]
