"""vilbench: a deterministic virtual vehicle-in-the-loop test harness.

A synchronous-tick world with a digital-twin ego vehicle, a free-running
camera detection stream, a redundant end-to-end-protected vehicle motion
gateway and a central-car-server control stack (ACC, lane keeping,
emergency brake), runnable in three deployment stages (internal, external,
ViL) with latency and tracking-error instrumentation.
"""

from .cecas import (AccParams, CentralCarServer, EbStatus, EmergencyBrakeState, LkaParams,
                    acc_law, accel_to_pedals, emergency_brake_update, lateral_control,
                    plan_waypoints)
from .command import ControlCommand, Gear, TurnSignal
from .dynamics import EgoVehicleState, VehicleParams, resistance_force, step_ego
from .gateway import (Channel, ChannelState, E2EFrame, Gateway, GatewayConfig, GatewayMode,
                      RequestSource, Verdict, arbitrate, crc8, decode_and_check, encode_frame,
                      set_mode)
from .geometry import Pose2D, WaypointPath, builtin_map, lateral_error, load_map
from .harness import replay_run, run_scenario
from .runlog import LatencyRecord, LatencyStats, RunLog, TickRow, measure_latencies, report
from .scenario import (ActorSpec, ScenarioConfig, ScenarioEvent, Stage, StageConfig,
                       acc_lka_scenario, emergency_brake_scenario, latency_sweep_scenario,
                       load_scenario, manual_drive_scenario)
from .sensors import (CameraConfig, CameraStream, DetectedObject, Detection, ObjectClass,
                      PerceptionMailbox, Scheduler, SignalClass, capture_frame,
                      next_capture_time, select_perception, tick_cadence)
from .worldcore import (ActorKind, ActorState, WorldState, distance_to_lead, spawn_actor,
                        spawn_ahead, step)

__version__ = "0.1.0"
