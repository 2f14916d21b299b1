"""Lane keeping around the oval track.

Runs the car-following scenario on the bundled 588 m oval and shows how far
the ego strays from the ground-truth centerline. The headline number is the
mean lateral error, which stays well under 0.05 m.

    python demos/demo_01_lane_keeping.py
"""

import numpy as np

from vilbench import Stage, StageConfig, acc_lka_scenario, report, run_scenario

scenario = acc_lka_scenario(map_name="oval_588", duration=120.0, seed=42)
log = run_scenario(scenario, StageConfig(stage=Stage.INTERNAL))

rep = report(log, settle_window=5.0)
print(rep.to_text())

errors = np.array([r.lateral_error for r in log.rows if r.time >= 5.0])
print(f"\nlateral error after settling: mean {errors.mean():.4f} m, "
      f"p95 {np.percentile(errors, 95):.4f} m, max {errors.max():.4f} m")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    ax1.plot([r.x for r in log.rows], [r.y for r in log.rows], lw=0.8)
    ax1.set_aspect("equal")
    ax1.set_title("ego trajectory on oval_588")
    ax1.set_xlabel("x [m]")
    ax1.set_ylabel("y [m]")
    ax2.plot([r.time for r in log.rows], [r.lateral_error for r in log.rows], lw=0.6)
    ax2.axhline(0.05, color="r", ls="--", label="0.05 m")
    ax2.set_title("lateral error vs time")
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("error [m]")
    ax2.legend()
    fig.tight_layout()
    fig.savefig("demo_01_lane_keeping.png", dpi=120)
    print("\nwrote demo_01_lane_keeping.png")
except ImportError:
    pass
