"""Deterministic replay: a recorded run is re-executed and diffed.

Saves an internal-stage run to disk, replays it (byte-identical), then
tampers with one steering value in the CSV and shows the replay verdict
pinpointing the edited tick.

    python demos/demo_06_replay.py
"""

import tempfile
from pathlib import Path

from vilbench import emergency_brake_scenario, replay_run, run_scenario
from vilbench.errors import DivergenceFound

scenario = emergency_brake_scenario(duration=8.0, seed=11)
log = run_scenario(scenario)

run_dir = Path(tempfile.mkdtemp(prefix="vilbench_demo_")) / "run"
log.save(str(run_dir))
print(f"run saved to {run_dir}")

rows = replay_run(str(run_dir))
print(f"replay verdict: {rows} rows byte-identical")

csv = run_dir / "ticks.csv"
lines = csv.read_text().splitlines()
parts = lines[200].split(",")
parts[6] = "0.3333"
lines[200] = ",".join(parts)
csv.write_text("\n".join(lines) + "\n")
print("tampered with the steering value at tick 199...")

try:
    replay_run(str(run_dir))
except DivergenceFound as exc:
    print(f"replay verdict: divergence found at tick {exc.tick}")
    print(f"  recorded: {exc.actual}")
    print(f"  expected: {exc.expected}")
