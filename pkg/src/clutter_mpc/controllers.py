"""Closed-loop execution: online re-planning (OR) and the naive re-planning baseline (NR)."""

from __future__ import annotations

import dataclasses
import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import DEFAULT_WEIGHTS, CostWeights, trajectory_cost
from .pbsto import PbstoParams, optimize
from .physics import (
    DEFAULT_PHYSICS,
    NO_NOISE,
    NoiseSpec,
    PhysicsParams,
    dropped_any_nontarget,
    is_grasped,
    reference_point,
    relax,
    step,
    target_dropped,
)
from .world import (
    W_ANG,
    W_ROBOT,
    Control,
    ControlLimits,
    CostBreakdown,
    Plan,
    Pose2,
    RobotState,
    SceneSpec,
    WorldState,
    state_deviation,
    wrap_angle,
)


class ReplanReason(str, enum.Enum):
    NONE = "none"
    NOT_PREDICTED_GRASPED = "not_predicted_grasped"
    STATE_DEVIATION = "state_deviation"
    TOO_FEW_CONTROLS = "too_few_controls"
    # NR only: a full open-loop plan ran out without grasping.
    PLAN_EXHAUSTED = "plan_exhausted"


class Outcome(str, enum.Enum):
    GRASPED = "grasped"
    NON_TARGET_DROPPED = "non_target_dropped"
    TARGET_DROPPED = "target_dropped"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class ReplanDecision:
    replan: bool
    reason: ReplanReason

    @classmethod
    def because(cls, reason: ReplanReason) -> ReplanDecision:
        return cls(reason is not ReplanReason.NONE, reason)


@dataclass(frozen=True)
class ReplanEvent:
    step: int
    reason: ReplanReason
    wall_time: float


@dataclass
class ExecutionLog:
    planner: str
    executed_controls: list[Control] = field(default_factory=list)
    observed_states: list[WorldState] = field(default_factory=list)
    # The first event (reason NONE) is the initial plan.
    replan_events: list[ReplanEvent] = field(default_factory=list)
    outcome: Outcome | None = None
    elapsed: float = 0.0
    executed_cost: CostBreakdown | None = None

    @property
    def replans(self) -> int:
        return sum(1 for e in self.replan_events if e.reason is not ReplanReason.NONE)

    @property
    def planner_calls(self) -> int:
        return len(self.replan_events)

    @property
    def init_plan_time(self) -> float:
        return self.replan_events[0].wall_time if self.replan_events else 0.0

    @property
    def replan_times(self) -> list[float]:
        return [e.wall_time for e in self.replan_events[1:]]

    @property
    def elapsed_from_first_move(self) -> float:
        """Elapsed time excluding the initial plan."""
        return self.elapsed - self.init_plan_time

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.GRASPED

    def to_dict(self, timing: bool = True) -> dict:
        """JSON form. ``timing=False`` drops every measured wall-clock field."""
        events = []
        for e in self.replan_events:
            ev = {"step": e.step, "reason": e.reason.value}
            if timing:
                ev["wall_time"] = e.wall_time
            events.append(ev)
        out = {
            "planner": self.planner,
            "outcome": self.outcome.value if self.outcome else None,
            "replans": self.replans,
            "executed_controls": [[*u.velocities(), u.duration] for u in self.executed_controls],
            "observed_states": [state_to_dict(x) for x in self.observed_states],
            "replan_events": events,
            "executed_cost": dataclasses.asdict(self.executed_cost) if self.executed_cost else None,
        }
        if timing:
            out["elapsed"] = self.elapsed
            out["elapsed_from_first_move"] = self.elapsed_from_first_move
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExecutionLog:
        log = cls(planner=data["planner"])
        log.executed_controls = [Control(*row) for row in data["executed_controls"]]
        log.observed_states = [state_from_dict(x) for x in data["observed_states"]]
        log.replan_events = [
            ReplanEvent(e["step"], ReplanReason(e["reason"]), e.get("wall_time", 0.0)) for e in data["replan_events"]
        ]
        log.outcome = Outcome(data["outcome"]) if data.get("outcome") else None
        log.elapsed = data.get("elapsed", 0.0)
        if data.get("executed_cost"):
            log.executed_cost = CostBreakdown(**data["executed_cost"])
        return log


def state_to_dict(x: WorldState) -> dict:
    return {
        "robot": x.robot.as_list(),
        "objects": [p.as_list() for p in x.objects],
        "dropped": list(x.dropped),
    }


def state_from_dict(d: dict) -> WorldState:
    return WorldState(
        RobotState(*d["robot"]),
        tuple(Pose2(*p) for p in d["objects"]),
        tuple(bool(b) for b in d["dropped"]),
    )


@dataclass(frozen=True)
class ControllerParams:
    many: PbstoParams = field(default_factory=lambda: PbstoParams(i_max=50))
    few: PbstoParams = field(default_factory=lambda: PbstoParams(i_max=1))
    sd_thresh: float = 0.02
    horizon: int = 6
    speed: float = 0.04
    duration: float = 1.0
    timeout: float = 120.0
    w_ang: float = W_ANG
    w_robot: float = W_ROBOT
    # False keeps running after a non-target drop until grasp or timeout.
    halt_on_drop: bool = True
    physics: PhysicsParams = DEFAULT_PHYSICS


class ExecutionWorld:
    """Ground-truth world the controllers act on and observe."""

    def __init__(self, scene: SceneSpec, noise: NoiseSpec = NO_NOISE, physics: PhysicsParams = DEFAULT_PHYSICS):
        self.scene = scene
        self.noise = noise
        self.physics = physics
        self.state = scene.initial_state()

    def observe(self) -> WorldState:
        return self.state

    def execute(self, u: Control) -> WorldState:
        self.state = step(self.state, u, self.scene, self.noise, self.physics)
        return self.state


def initial_straight_controls(
    x: WorldState,
    scene: SceneSpec,
    n: int = 6,
    speed: float = 0.04,
    duration: float = 1.0,
    limits: ControlLimits | None = None,
) -> tuple[Control, ...]:
    """n identical controls driving the palm toward the target while turning to face it."""
    if n < 1 or speed <= 0:
        raise ValueError("need n >= 1 and speed > 0")
    target = x.objects[scene.target_index]
    rx, ry = reference_point(x.robot, scene.robot)
    dx, dy = target.x - rx, target.y - ry
    dist = math.hypot(dx, dy)
    if dist < 1e-12:
        return tuple(Control(duration=duration) for _ in range(n))
    v_x, v_y = speed * dx / dist, speed * dy / dist
    v_rot = wrap_angle(math.atan2(dy, dx) - x.robot.theta_rot) / (n * duration)
    v = (v_x, v_y, v_rot, 0.0)
    if limits is not None:
        v = limits.clamp(*v)
    return tuple(Control(*v, duration=duration) for _ in range(n))


def needs_replan(
    plan: Plan,
    observed: WorldState,
    scene: SceneSpec,
    sd_thresh: float,
    n_min: int,
    w_ang: float = W_ANG,
    w_robot: float = W_ROBOT,
) -> ReplanDecision:
    """Check the remaining (already shifted) plan against the observation."""
    if not is_grasped(plan.predicted_states[-1], scene):
        return ReplanDecision.because(ReplanReason.NOT_PREDICTED_GRASPED)
    if state_deviation(plan.predicted_states[0], observed, w_ang, w_robot) > sd_thresh:
        return ReplanDecision.because(ReplanReason.STATE_DEVIATION)
    if len(plan.controls) < n_min:
        return ReplanDecision.because(ReplanReason.TOO_FEW_CONTROLS)
    return ReplanDecision.because(ReplanReason.NONE)


def _call_seed(seed: int, call: int) -> int:
    return int(np.random.SeedSequence([seed, call]).generate_state(1)[0])


def _initial_belief(execution: ExecutionWorld, planning_scene: SceneSpec) -> WorldState:
    """The planner's first picture of the world: its own object layout, the real robot."""
    prior = planning_scene.initial_state()
    return WorldState(execution.observe().robot, prior.objects, prior.dropped)


def _terminal(x: WorldState, scene: SceneSpec) -> Outcome | None:
    if dropped_any_nontarget(x, scene):
        return Outcome.NON_TARGET_DROPPED
    if target_dropped(x, scene):
        return Outcome.TARGET_DROPPED
    if is_grasped(x, scene):
        return Outcome.GRASPED
    return None


class _Episode:
    """Shared bookkeeping for both controllers."""

    def __init__(self, name, execution, planning_scene, params, seed, weights, planning_noise, clock):
        self.execution = execution
        self.planning_scene = planning_scene
        self.params = params
        self.seed = seed
        self.weights = weights
        self.planning_noise = planning_noise
        self.clock = clock
        self.log = ExecutionLog(planner=name)
        self.log.observed_states.append(execution.observe())
        self.dropped_once = False

    def plan(self, state, init, pbsto: PbstoParams, reason: ReplanReason) -> Plan:
        t0 = self.clock()
        # Read the observation against the planner's own shapes first.
        state = relax(state, self.planning_scene, params=self.params.physics)
        plan = optimize(
            state, init, self.planning_scene, self.weights, pbsto,
            seed=_call_seed(self.seed, self.log.planner_calls),
            noise=self.planning_noise, physics=self.params.physics,
        )
        wall = self.clock() - t0
        self.log.replan_events.append(ReplanEvent(len(self.log.executed_controls), reason, wall))
        self.log.elapsed += wall
        return plan

    def straight(self, x: WorldState, n: int) -> tuple[Control, ...]:
        p = self.params
        return initial_straight_controls(x, self.planning_scene, n, p.speed, p.duration, p.many.limits)

    def execute(self, u: Control) -> Outcome | None:
        x = self.execution.execute(u)
        self.log.executed_controls.append(u)
        self.log.observed_states.append(x)
        self.log.elapsed += u.duration
        return self.status()

    def status(self) -> Outcome | None:
        out = _terminal(self.execution.observe(), self.execution.scene)
        if out is Outcome.NON_TARGET_DROPPED and not self.params.halt_on_drop:
            self.dropped_once = True
            out = _terminal_ignoring_drops(self.execution.observe(), self.execution.scene)
            if out is Outcome.GRASPED:
                return Outcome.NON_TARGET_DROPPED
        late = self.log.elapsed > self.params.timeout
        if (out is None and self.log.elapsed >= self.params.timeout) or (out is Outcome.GRASPED and late):
            out = Outcome.NON_TARGET_DROPPED if self.dropped_once else Outcome.TIMEOUT
        return out

    def finish(self, outcome: Outcome) -> ExecutionLog:
        log = self.log
        log.outcome = outcome
        log.executed_cost = trajectory_cost(
            log.executed_controls, log.observed_states, self.execution.scene, self.weights
        )
        return log


def _terminal_ignoring_drops(x: WorldState, scene: SceneSpec) -> Outcome | None:
    if target_dropped(x, scene):
        return Outcome.TARGET_DROPPED
    if is_grasped(x, scene):
        return Outcome.GRASPED
    return None


def run_or(
    execution: ExecutionWorld,
    planning_scene: SceneSpec,
    params: ControllerParams = ControllerParams(),
    seed: int = 0,
    weights: CostWeights = DEFAULT_WEIGHTS,
    planning_noise: NoiseSpec = NO_NOISE,
    on_step: Callable[[Plan], None] | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> ExecutionLog:
    """Plan once with many iterations, then execute and repair the plan step by step."""
    ep = _Episode("or", execution, planning_scene, params, seed, weights, planning_noise, clock)
    outcome = ep.status()
    if outcome is not None:
        return ep.finish(outcome)

    belief = _initial_belief(execution, planning_scene)
    plan = ep.plan(belief, ep.straight(belief, params.horizon), params.many, ReplanReason.NONE)
    while True:
        if ep.log.elapsed >= params.timeout:
            return ep.finish(Outcome.NON_TARGET_DROPPED if ep.dropped_once else Outcome.TIMEOUT)
        outcome = ep.execute(plan.controls[0])
        plan = plan.shift()
        if outcome is not None:
            return ep.finish(outcome)
        x = execution.observe()
        decision = needs_replan(plan, x, planning_scene, params.sd_thresh, params.few.n_min, params.w_ang, params.w_robot)
        if decision.replan:
            tail = ep.straight(plan.predicted_states[-1], 1)
            plan = ep.plan(x, plan.controls + tail, params.few, decision.reason)
        if on_step is not None:
            on_step(plan)


def run_nr(
    execution: ExecutionWorld,
    planning_scene: SceneSpec,
    params: ControllerParams = ControllerParams(),
    seed: int = 0,
    weights: CostWeights = DEFAULT_WEIGHTS,
    planning_noise: NoiseSpec = NO_NOISE,
    on_step: Callable[[Plan], None] | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> ExecutionLog:
    """Plan from scratch, run the whole plan open loop, repeat until done."""
    ep = _Episode("nr", execution, planning_scene, params, seed, weights, planning_noise, clock)
    outcome = ep.status()
    if outcome is not None:
        return ep.finish(outcome)

    state = _initial_belief(execution, planning_scene)
    reason = ReplanReason.NONE
    while True:
        plan = ep.plan(state, ep.straight(state, params.horizon), params.many, reason)
        if on_step is not None:
            on_step(plan)
        if ep.log.elapsed >= params.timeout:
            return ep.finish(Outcome.NON_TARGET_DROPPED if ep.dropped_once else Outcome.TIMEOUT)
        for u in plan.controls:
            outcome = ep.execute(u)
            if outcome is not None:
                return ep.finish(outcome)
        state = execution.observe()
        reason = ReplanReason.PLAN_EXHAUSTED
