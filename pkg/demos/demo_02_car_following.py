"""Car following: ego launches from rest behind a 30 km/h lead.

Reproduces the approach-and-settle gap trace: the lead pulls away at first,
then the gap shrinks monotonically and settles at the constant-time-gap
equilibrium d0 + tau * v_lead = 17.5 m.

    python demos/demo_02_car_following.py
"""

from vilbench import Stage, StageConfig, acc_lka_scenario, run_scenario

scenario = acc_lka_scenario(map_name="straight_1km", duration=90.0, seed=42,
                            lead_ahead=50.0, lead_speed=30.0 / 3.6)
log = run_scenario(scenario, StageConfig(stage=Stage.INTERNAL))

eq = 5.0 + 1.5 * (30.0 / 3.6)
print(f"equilibrium gap d0 + tau*v_lead = {eq:.1f} m")
print(f"{'t [s]':>6}  {'gap [m]':>8}  {'ego speed [m/s]':>15}")
for t in range(0, 90, 6):
    row = log.rows[int(t / scenario.tick_period)]
    print(f"{row.time:6.1f}  {row.gap:8.2f}  {row.speed:15.2f}")

final = log.rows[-1]
print(f"\nfinal gap {final.gap:.2f} m (min over run "
      f"{min(r.gap for r in log.rows):.2f} m, never a collision)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([r.time for r in log.rows], [r.gap for r in log.rows])
    ax.axhline(eq, color="g", ls="--", label=f"equilibrium {eq:.1f} m")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("bumper gap [m]")
    ax.set_title("distance between the two vehicles while approaching")
    ax.legend()
    fig.tight_layout()
    fig.savefig("demo_02_car_following.png", dpi=120)
    print("wrote demo_02_car_following.png")
except ImportError:
    pass
