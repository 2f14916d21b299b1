"""Redundant gateway channels: fault injection in the ViL stage.

Spawns the car-server and gateway peer processes, then cuts the primary
control channel mid-run. The gateway times the channel out, falls back to
the secondary with limited authority, and (when both channels die) latches
the emergency stop and brings the vehicle to a standstill.

    python demos/demo_04_gateway_failover.py
"""

from vilbench import Stage, StageConfig, acc_lka_scenario, run_scenario

scenario = acc_lka_scenario(map_name="straight_1km", duration=10.0, seed=42)

print("=== primary channel killed at t = 4 s ===")
log = run_scenario(scenario, StageConfig(stage=Stage.VIL, kill_primary_at=4.0))
for e in log.events:
    print(f"  t={e.time:6.2f}  {e.kind:16s} {e.detail}")
switch = next(r for r in log.rows if r.mode == "FallbackLimited")
print(f"fallback engaged {switch.time - 4.0:.3f} s after the cut "
      f"(rx timeout 0.100 s + one 0.020 s tick bound)")
print(f"throttle capped afterwards: max "
      f"{max(r.throttle for r in log.rows if r.mode == 'FallbackLimited'):.2f} <= 0.30")

print("\n=== both channels killed at t = 4 s ===")
log2 = run_scenario(scenario, StageConfig(stage=Stage.VIL, kill_primary_at=4.0,
                                          kill_secondary_at=4.0))
engage = next(r for r in log2.rows if r.mode == "EmergencyStop")
stopped = next(r for r in log2.rows if r.time > engage.time and r.speed == 0.0)
print(f"emergency stop at t={engage.time:.2f} s from {engage.speed:.2f} m/s, "
      f"standstill at t={stopped.time:.2f} s "
      f"({stopped.time - engage.time:.2f} s of full braking)")
