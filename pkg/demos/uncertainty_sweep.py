"""Small OR vs NR comparison across the four uncertainty levels.

    python demos/uncertainty_sweep.py [scenes]

Prints success rate, mean replans and mean executed cost for each cell.
The acceptance suite runs the same experiment with 20 scenes.
"""

import sys

from clutter_mpc.harness import ExperimentConfig, run_experiment

scenes = int(sys.argv[1]) if len(sys.argv) > 1 else 5
config = ExperimentConfig(scenes=scenes, seed=0)


def progress(row):
    mark = "ok " if row.success else "-- "
    print(f"  {mark} scene {row.scene:2d} {row.level:6s} {row.planner}  replans={row.replans}", flush=True)


result = run_experiment(config, progress=progress)

print(f"\n{'level':8s}{'planner':9s}{'success':>9s}{'replans':>10s}{'cost':>12s}")
for level in config.levels:
    for planner in config.planners:
        s = result.summary[level][planner]
        cost = "n/a" if s["cost_mean"] is None else f"{s['cost_mean']:.4g}"
        print(f"{level:8s}{planner:9s}{s['success_rate']:9.0%}{s['replans_mean']:10.1f}{cost:>12s}")
