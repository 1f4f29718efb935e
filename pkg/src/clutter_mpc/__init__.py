"""Planar physics-based trajectory optimisation and re-planning for grasping in clutter."""

from .controllers import (
    ControllerParams,
    ExecutionLog,
    ExecutionWorld,
    Outcome,
    ReplanReason,
    initial_straight_controls,
    needs_replan,
    run_nr,
    run_or,
)
from .cost import CostWeights, goal_cost, trajectory_cost
from .harness import ExperimentConfig, render_trace, run_experiment
from .pbsto import PbstoParams, optimize
from .physics import NoiseSpec, PhysicsParams, is_grasped, rollout, step
from .uncertainty import SceneGenParams, UncertaintyLevel, generate_scene, noise_spec, perturb_scene
from .world import (
    Box,
    Circle,
    Control,
    ObjectSpec,
    Plan,
    Pose2,
    RobotState,
    SceneSpec,
    Table,
    WorldState,
    load_scene,
    make_scene,
    save_scene,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Circle",
    "Control",
    "ControllerParams",
    "CostWeights",
    "ExecutionLog",
    "ExecutionWorld",
    "ExperimentConfig",
    "NoiseSpec",
    "ObjectSpec",
    "Outcome",
    "PbstoParams",
    "PhysicsParams",
    "Plan",
    "Pose2",
    "ReplanReason",
    "RobotState",
    "SceneGenParams",
    "SceneSpec",
    "Table",
    "UncertaintyLevel",
    "WorldState",
    "generate_scene",
    "goal_cost",
    "initial_straight_controls",
    "is_grasped",
    "load_scene",
    "make_scene",
    "needs_replan",
    "noise_spec",
    "optimize",
    "perturb_scene",
    "render_trace",
    "rollout",
    "run_experiment",
    "run_nr",
    "run_or",
    "save_scene",
    "step",
    "trajectory_cost",
]
