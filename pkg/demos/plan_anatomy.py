"""Look inside one optimizer call: cost history, truncation and per-step terms.

    python demos/plan_anatomy.py [seed]
"""

import sys

from clutter_mpc.controllers import initial_straight_controls
from clutter_mpc.pbsto import PbstoParams, optimize
from clutter_mpc.physics import is_grasped
from clutter_mpc.uncertainty import SceneGenParams, generate_scene

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
scene = generate_scene(SceneGenParams(object_count=6), seed)
x0 = scene.initial_state()
init = initial_straight_controls(x0, scene, 6)

plan = optimize(x0, init, scene, params=PbstoParams(i_max=50), seed=seed)

print(f"{plan.rollouts} rollouts, truncated={plan.truncated}, {len(plan)} controls kept")
print("best cost after each iteration:")
for i, c in enumerate(plan.history):
    print(f"  {i:3d}  {c:.6g}")

print("\ncost of each plan prefix (goal measured at the prefix end, other terms summed):")
print("  step      goal   disturb      edge     accel      total")
for t, b in enumerate(plan.per_step_costs):
    print(f"  {t:4d}  {b.goal:8.4f}  {b.disturbance:8.2e}  {b.edge:8.2e}  {b.acceleration:8.2e}  {b.total:9.4g}")
print(f"\nprediction ends grasped: {is_grasped(plan.predicted_states[-1], scene)}")
