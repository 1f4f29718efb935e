"""Trajectory cost: terminal goal term plus per-step disturbance, edge and acceleration terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .physics import reference_point, gripper_axes
from .world import W_ANG, Control, CostBreakdown, SceneSpec, WorldState, wrap_angle, ZERO_CONTROL


@dataclass(frozen=True)
class CostWeights:
    w_g: float = 10000.0
    w_phi: float = 1.0
    w_d: float = 800.0
    w_e: float = 1.0
    w_a: float = 0.1
    k: float = 1000.0
    exp_clamp: float = 50.0
    w_ang: float = W_ANG
    # Goal cost charged when the target has left the table.
    dropped_target_cost: float = 10.0
    include_target_disturbance: bool = False

    def __post_init__(self):
        for name in ("w_g", "w_phi", "w_d", "w_e", "w_a", "w_ang"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.k <= 0 or self.exp_clamp <= 0:
            raise ValueError("k and exp_clamp must be positive")


DEFAULT_WEIGHTS = CostWeights()


def goal_terms(x: WorldState, scene: SceneSpec) -> tuple[float, float]:
    """Distance and unsigned bearing error from the gripper reference point to the target."""
    target = x.objects[scene.target_index]
    rx, ry = reference_point(x.robot, scene.robot)
    vx, vy = target.x - rx, target.y - ry
    d = math.hypot(vx, vy)
    if d == 0.0:
        return 0.0, 0.0
    fx, fy = gripper_axes(x.robot)
    phi = math.atan2(abs(fx * vy - fy * vx), fx * vx + fy * vy)
    return d, phi


def goal_cost(x: WorldState, scene: SceneSpec, weights: CostWeights = DEFAULT_WEIGHTS) -> float:
    if x.dropped[scene.target_index]:
        return weights.dropped_target_cost
    d, phi = goal_terms(x, scene)
    return d * d + weights.w_phi * phi * phi


def disturbance_cost(
    x_t: WorldState, x_t1: WorldState, scene: SceneSpec, weights: CostWeights = DEFAULT_WEIGHTS
) -> float:
    k = scene.target_index
    total = 0.0
    for i, (p, q) in enumerate(zip(x_t.objects, x_t1.objects)):
        if i == k and not weights.include_target_disturbance:
            continue
        dth = wrap_angle(q.theta - p.theta)
        total += (q.x - p.x) ** 2 + (q.y - p.y) ** 2 + weights.w_ang * dth * dth
    return total


def edge_cost(x_t: WorldState, x_t1: WorldState, scene: SceneSpec, weights: CostWeights = DEFAULT_WEIGHTS) -> float:
    """Exponential penalty on motion of objects that end the step outside the safe zone.

    A fall costs the clamped maximum on the step it happens and nothing after.
    """
    t = scene.table
    sx, sy = t.half_x - t.safe_margin, t.half_y - t.safe_margin
    cap = math.exp(weights.exp_clamp)
    total = 0.0
    for p, q, was, gone in zip(x_t.objects, x_t1.objects, x_t.dropped, x_t1.dropped):
        if was:
            continue  # charged once, on the step it fell
        if gone:
            total += cap
        elif abs(q.x) > sx or abs(q.y) > sy:
            d = math.hypot(q.x - p.x, q.y - p.y)
            total += math.exp(min(weights.k * d, weights.exp_clamp))
    return total


def acceleration_cost(u_prev: Control, u: Control) -> float:
    return sum((a - b) ** 2 for a, b in zip(u.velocities(), u_prev.velocities()))


class CostAccumulator:
    """Running evaluation of the objective along a trajectory.

    After each ``add`` the prefix breakdown treats the newest state as terminal,
    which is what the optimizer's early-exit test needs.
    """

    def __init__(self, scene: SceneSpec, weights: CostWeights = DEFAULT_WEIGHTS, u_prev: Control = ZERO_CONTROL):
        self.scene = scene
        self.weights = weights
        self.u_prev = u_prev
        self.disturbance = 0.0
        self.edge = 0.0
        self.acceleration = 0.0
        self.running = 0.0

    def add(self, u: Control, x_t: WorldState, x_t1: WorldState) -> CostBreakdown:
        w = self.weights
        c_a = acceleration_cost(self.u_prev, u)
        c_d = disturbance_cost(x_t, x_t1, self.scene, w)
        c_e = edge_cost(x_t, x_t1, self.scene, w)
        self.acceleration += c_a
        self.disturbance += c_d
        self.edge += c_e
        self.running += w.w_a * c_a + w.w_d * c_d + w.w_e * c_e
        self.u_prev = u
        return self.breakdown(x_t1)

    def breakdown(self, terminal: WorldState) -> CostBreakdown:
        g = goal_cost(terminal, self.scene, self.weights)
        return CostBreakdown(
            goal=g,
            disturbance=self.disturbance,
            edge=self.edge,
            acceleration=self.acceleration,
            total=self.weights.w_g * g + self.running,
        )


def trajectory_cost(
    controls: Sequence[Control],
    states: Sequence[WorldState],
    scene: SceneSpec,
    weights: CostWeights = DEFAULT_WEIGHTS,
    u_prev: Control = ZERO_CONTROL,
) -> CostBreakdown:
    """Weighted objective of a state/control trajectory.

    Works on any prefix as well: the goal term is taken at the last state given.
    Controls before the first are taken as zero unless ``u_prev`` says otherwise.
    """
    if len(states) != len(controls) + 1:
        raise ValueError(f"need len(states) == len(controls) + 1, got {len(states)} and {len(controls)}")
    acc = CostAccumulator(scene, weights, u_prev)
    for t, u in enumerate(controls):
        acc.add(u, states[t], states[t + 1])
    return acc.breakdown(states[-1])


def recompute_total(b: CostBreakdown, weights: CostWeights = DEFAULT_WEIGHTS) -> float:
    return weights.w_g * b.goal + weights.w_d * b.disturbance + weights.w_e * b.edge + weights.w_a * b.acceleration
