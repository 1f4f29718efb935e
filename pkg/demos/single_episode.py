"""Run OR and NR on one generated scene and draw both executions.

    python demos/single_episode.py [level] [scene-index]

Writes ``demo-or.svg`` and ``demo-nr.svg`` to the current directory.
"""

import sys

from clutter_mpc.harness import ExperimentConfig, render_trace, run_episode, scene_for

level = sys.argv[1] if len(sys.argv) > 1 else "medium"
index = int(sys.argv[2]) if len(sys.argv) > 2 else 0

config = ExperimentConfig(seed=0)
scene = scene_for(config, index)
print(f"scene {index}: {len(scene.objects)} objects, target is object {scene.target_index}, level {level}")

for planner in ("or", "nr"):
    log = run_episode(config, scene, index, level, planner)
    reasons = [e.reason.value for e in log.replan_events]
    print(f"\n{planner.upper()}: {log.outcome.value} after {len(log.executed_controls)} controls")
    print(f"  planner calls {log.planner_calls}, replans {log.replans}")
    print(f"  first plan took {log.init_plan_time:.2f} s; later calls {sum(log.replan_times):.2f} s in total")
    print(f"  replan reasons: {', '.join(sorted(set(reasons[1:]))) or 'none'}")
    print(f"  executed cost {log.executed_cost.total:.4g}")
    frames = render_trace(log, scene, f"demo-{planner}.svg", stride=2)
    print(f"  wrote demo-{planner}.svg ({frames} frames)")
