"""Per-run telemetry: tick rows, latency records, reports and disk io.

Rows are written as CSV with shortest-roundtrip float formatting so that a
deterministic rerun reproduces the file byte for byte; events, latency
records and the config snapshot go into a JSON sidecar.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoTriggers

CSV_HEADER = ("tick,time,x,y,heading,speed,steer,throttle,brake,"
              "lateral_error,gap,mode,eb_status")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class TickRow:
    tick: int
    time: float
    x: float
    y: float
    heading: float
    speed: float
    steer: float
    throttle: float
    brake: float
    lateral_error: float
    gap: Optional[float]
    mode: str
    eb_status: str

    def to_csv(self) -> str:
        return ",".join(_fmt(v) for v in (
            self.tick, self.time, self.x, self.y, self.heading, self.speed, self.steer,
            self.throttle, self.brake, self.lateral_error, self.gap, self.mode, self.eb_status))


@dataclass(frozen=True)
class LatencyRecord:
    """Detection-to-brake timing of one emergency-brake trigger."""

    trigger_frame: int
    capture_time: float        # when the triggering object became visible
    trigger_time: float        # control cycle that latched the brake
    brake_applied_time: float  # first tick where dynamics received brake = 1

    def __post_init__(self):
        if not (self.capture_time <= self.trigger_time <= self.brake_applied_time):
            raise ValueError(
                f"latency ordering violated: {self.capture_time} <= "
                f"{self.trigger_time} <= {self.brake_applied_time}")

    @property
    def latency_capture_to_brake(self) -> float:
        return self.brake_applied_time - self.capture_time

    def to_json(self) -> dict:
        return {"trigger_frame": self.trigger_frame, "capture_time": self.capture_time,
                "trigger_time": self.trigger_time, "brake_applied_time": self.brake_applied_time,
                "latency_capture_to_brake": self.latency_capture_to_brake}


@dataclass(frozen=True)
class RunEvent:
    time: float
    kind: str
    detail: str = ""


@dataclass
class RunLog:
    scenario_name: str = ""
    stage: str = "internal"
    seed: int = 0
    tick_period: float = 0.020
    rows: list[TickRow] = field(default_factory=list)
    events: list[RunEvent] = field(default_factory=list)
    latency_records: list[LatencyRecord] = field(default_factory=list)
    comfort_emissions: int = 0
    control_emissions: int = 0
    config_snapshot: dict = field(default_factory=dict)
    terminated: Optional[str] = None   # early-termination reason, None if completed
    raw_lines: Optional[list[str]] = None  # populated when loaded from disk

    def row_lines(self) -> list[str]:
        return [r.to_csv() for r in self.rows]

    def save(self, run_dir: str) -> None:
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, "ticks.csv"), "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for line in self.row_lines():
                fh.write(line + "\n")
        sidecar = {
            "scenario_name": self.scenario_name,
            "stage": self.stage,
            "seed": self.seed,
            "tick_period": self.tick_period,
            "comfort_emissions": self.comfort_emissions,
            "control_emissions": self.control_emissions,
            "terminated": self.terminated,
            "events": [{"time": e.time, "kind": e.kind, "detail": e.detail} for e in self.events],
            "latency_records": [r.to_json() for r in self.latency_records],
            "config": self.config_snapshot,
        }
        with open(os.path.join(run_dir, "run.json"), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)

    @classmethod
    def load(cls, run_dir: str) -> "RunLog":
        with open(os.path.join(run_dir, "run.json"), "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        with open(os.path.join(run_dir, "ticks.csv"), "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"{run_dir}/ticks.csv missing expected header")
        log = cls(
            scenario_name=sidecar["scenario_name"], stage=sidecar["stage"],
            seed=sidecar["seed"], tick_period=sidecar["tick_period"],
            comfort_emissions=sidecar.get("comfort_emissions", 0),
            control_emissions=sidecar.get("control_emissions", 0),
            config_snapshot=sidecar.get("config", {}),
            terminated=sidecar.get("terminated"),
            events=[RunEvent(e["time"], e["kind"], e.get("detail", ""))
                    for e in sidecar.get("events", [])],
            latency_records=[
                LatencyRecord(r["trigger_frame"], r["capture_time"], r["trigger_time"],
                              r["brake_applied_time"])
                for r in sidecar.get("latency_records", [])],
            raw_lines=lines[1:],
        )
        for line in lines[1:]:
            log.rows.append(_row_from_csv(line))
        return log


def _row_from_csv(line: str) -> TickRow:
    parts = line.split(",")
    if len(parts) != 13:
        raise ValueError(f"expected 13 CSV fields, got {len(parts)}: {line!r}")
    return TickRow(
        tick=int(parts[0]), time=float(parts[1]), x=float(parts[2]), y=float(parts[3]),
        heading=float(parts[4]), speed=float(parts[5]), steer=float(parts[6]),
        throttle=float(parts[7]), brake=float(parts[8]), lateral_error=float(parts[9]),
        gap=float(parts[10]) if parts[10] else None, mode=parts[11], eb_status=parts[12])


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean: float
    p50: float
    p95: float
    max: float

    def to_json(self) -> dict:
        return {"count": self.count, "mean": self.mean, "p50": self.p50,
                "p95": self.p95, "max": self.max}


def measure_latencies(log: RunLog) -> LatencyStats:
    """Statistics over the capture-to-brake latencies of all triggers."""
    if not log.latency_records:
        raise NoTriggers("run log contains no emergency-brake triggers")
    lat = np.array([r.latency_capture_to_brake for r in log.latency_records])
    return LatencyStats(count=len(lat), mean=float(np.mean(lat)),
                        p50=float(np.percentile(lat, 50)),
                        p95=float(np.percentile(lat, 95)), max=float(np.max(lat)))


@dataclass
class Report:
    scenario_name: str
    stage: str
    ticks: int
    duration: float
    settle_window: float
    mean_lateral_error: float
    max_lateral_error: float
    final_gap: Optional[float]
    min_gap: Optional[float]
    latency: Optional[LatencyStats]
    gap_series: list[tuple[float, float]]
    mode_timeline: list[RunEvent]
    terminated: Optional[str]

    def to_json(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "stage": self.stage,
            "ticks": self.ticks,
            "duration": self.duration,
            "settle_window": self.settle_window,
            "mean_lateral_error": self.mean_lateral_error,
            "max_lateral_error": self.max_lateral_error,
            "final_gap": self.final_gap,
            "min_gap": self.min_gap,
            "latency": self.latency.to_json() if self.latency else None,
            "gap_series": self.gap_series,
            "mode_timeline": [{"time": e.time, "kind": e.kind, "detail": e.detail}
                              for e in self.mode_timeline],
            "terminated": self.terminated,
        }

    def to_text(self) -> str:
        lines = [
            f"scenario {self.scenario_name} [{self.stage}], {self.ticks} ticks "
            f"({self.duration:.2f} s virtual)",
            f"lateral error (after {self.settle_window:.1f} s settle): "
            f"mean {self.mean_lateral_error:.4f} m, max {self.max_lateral_error:.4f} m",
        ]
        if self.final_gap is not None:
            lines.append(f"gap to lead: final {self.final_gap:.2f} m, min {self.min_gap:.2f} m")
        if self.latency is not None:
            s = self.latency
            lines.append(f"emergency-brake latency over {s.count} trigger(s): "
                         f"mean {s.mean * 1e3:.1f} ms, p50 {s.p50 * 1e3:.1f} ms, "
                         f"p95 {s.p95 * 1e3:.1f} ms, max {s.max * 1e3:.1f} ms")
        for e in self.mode_timeline:
            lines.append(f"  t={e.time:8.3f}  {e.kind}  {e.detail}")
        if self.terminated:
            lines.append(f"terminated early: {self.terminated}")
        return "\n".join(lines)


def report(log: RunLog, settle_window: float = 0.0, gap_series_stride: int = 10) -> Report:
    """Summarize a run: tracking error, gap trace, latencies, event timeline."""
    rows = [r for r in log.rows if r.time >= settle_window]
    errors = [r.lateral_error for r in rows] or [0.0]
    gaps = [(r.time, r.gap) for r in log.rows if r.gap is not None]
    latency = None
    if log.latency_records:
        latency = measure_latencies(log)
    return Report(
        scenario_name=log.scenario_name,
        stage=log.stage,
        ticks=len(log.rows),
        duration=len(log.rows) * log.tick_period,
        settle_window=settle_window,
        mean_lateral_error=float(np.mean(errors)),
        max_lateral_error=float(np.max(errors)),
        final_gap=gaps[-1][1] if gaps else None,
        min_gap=min(g for _, g in gaps) if gaps else None,
        latency=latency,
        gap_series=gaps[::gap_series_stride],
        mode_timeline=[e for e in log.events],
        terminated=log.terminated,
    )
