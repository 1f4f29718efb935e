"""Domain types: poses, robot state, controls, scenes, plans, and scene file I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import jsonschema

TWO_PI = 2.0 * math.pi

# Defaults for the state-deviation norm.
W_ANG = 0.05
W_ROBOT = 1.0


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]. Values already in range come back untouched."""
    if -math.pi < theta <= math.pi:
        return theta
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


class SceneError(ValueError):
    """Raised when a scene file fails to parse or violates an invariant."""


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]


@dataclass(frozen=True)
class RobotState:
    """Joint values of the planar gripper: two prismatic axes, a rotation and the opening."""

    theta_x: float
    theta_y: float
    theta_rot: float
    theta_grip: float

    def __post_init__(self):
        object.__setattr__(self, "theta_rot", wrap_angle(float(self.theta_rot)))

    def as_list(self) -> list[float]:
        return [self.theta_x, self.theta_y, self.theta_rot, self.theta_grip]


@dataclass(frozen=True)
class Circle:
    radius: float

    @property
    def bounding_radius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Box:
    half_x: float
    half_y: float

    @property
    def bounding_radius(self) -> float:
        return math.hypot(self.half_x, self.half_y)


ObjectShape = Circle | Box


@dataclass(frozen=True)
class ObjectSpec:
    shape: ObjectShape
    mass: float
    friction: float
    pose: Pose2
    is_target: bool = False
    # Recorded for completeness; the planar model ignores it.
    height: float | None = None


@dataclass(frozen=True)
class Table:
    half_x: float = 0.3
    half_y: float = 0.3
    safe_margin: float = 0.05


@dataclass(frozen=True)
class RobotGeometry:
    """Gripper links in the gripper frame (x forward, y lateral), all half-extents.

    The palm is centred on the robot origin. Each finger starts at the palm's
    front face and its inner face sits at lateral offset +/- theta_grip.
    """

    palm_half_depth: float = 0.02
    palm_half_width: float = 0.08
    finger_half_length: float = 0.06
    finger_half_width: float = 0.02
    grip_min: float = 0.03
    grip_max: float = 0.06

    @property
    def reference_offset(self) -> float:
        """Forward distance from the robot origin to the palm's inner face midpoint."""
        return self.palm_half_depth

    @property
    def reach(self) -> float:
        """Forward distance from the robot origin to the fingertips."""
        return self.palm_half_depth + 2.0 * self.finger_half_length


@dataclass(frozen=True)
class WorldState:
    robot: RobotState
    objects: tuple[Pose2, ...]
    dropped: tuple[bool, ...]

    def __post_init__(self):
        if len(self.objects) != len(self.dropped):
            raise ValueError("objects and dropped flags must align")


@dataclass(frozen=True)
class Control:
    v_x: float = 0.0
    v_y: float = 0.0
    v_rot: float = 0.0
    v_grip: float = 0.0
    duration: float = 1.0

    def velocities(self) -> tuple[float, float, float, float]:
        return (self.v_x, self.v_y, self.v_rot, self.v_grip)


@dataclass(frozen=True)
class ControlLimits:
    """Velocity bounds. Translation is bounded on the resultant speed."""

    max_speed: float = 0.1
    max_rot: float = math.pi / 4
    max_grip: float = 0.02

    def clamp(self, v_x: float, v_y: float, v_rot: float, v_grip: float):
        speed = math.hypot(v_x, v_y)
        if speed > self.max_speed:
            s = self.max_speed / speed
            v_x, v_y = v_x * s, v_y * s
        v_rot = min(max(v_rot, -self.max_rot), self.max_rot)
        v_grip = min(max(v_grip, -self.max_grip), self.max_grip)
        return v_x, v_y, v_rot, v_grip


@dataclass(frozen=True)
class SceneSpec:
    table: Table
    robot: RobotGeometry
    objects: tuple[ObjectSpec, ...]
    robot_initial: RobotState

    @property
    def target_index(self) -> int:
        for i, o in enumerate(self.objects):
            if o.is_target:
                return i
        raise SceneError("scene has no target object")

    def initial_state(self) -> WorldState:
        return WorldState(
            robot=self.robot_initial,
            objects=tuple(o.pose for o in self.objects),
            dropped=tuple(_centroid_off_table(o.pose, self.table) for o in self.objects),
        )


@dataclass(frozen=True)
class CostBreakdown:
    """Raw (unweighted) cost terms of a trajectory plus the weighted total.

    ``goal`` is evaluated at the last state; the other fields are sums over steps.
    """

    goal: float
    disturbance: float
    edge: float
    acceleration: float
    total: float


@dataclass(frozen=True)
class Plan:
    controls: tuple[Control, ...]
    predicted_states: tuple[WorldState, ...]
    total_cost: float
    # Entry t is the breakdown of the prefix (controls[:t+1], predicted_states[:t+2]).
    per_step_costs: tuple[CostBreakdown, ...] = ()
    # Optimizer diagnostics: candidate cost after each iteration (index 0 = initial).
    history: tuple[float, ...] = ()
    rollouts: int = 0
    truncated: bool = False

    def __post_init__(self):
        if len(self.predicted_states) != len(self.controls) + 1:
            raise ValueError(
                f"plan has {len(self.controls)} controls but {len(self.predicted_states)} states"
            )

    def __len__(self) -> int:
        return len(self.controls)

    def shift(self) -> Plan:
        """Drop the executed head control and its start state."""
        if not self.controls:
            raise ValueError("cannot shift an empty plan")
        return replace(
            self,
            controls=self.controls[1:],
            predicted_states=self.predicted_states[1:],
            per_step_costs=(),
        )


def _centroid_off_table(pose: Pose2, table: Table) -> bool:
    return abs(pose.x) > table.half_x or abs(pose.y) > table.half_y


def state_deviation(a: WorldState, b: WorldState, w_ang: float = W_ANG, w_robot: float = W_ROBOT) -> float:
    """Weighted Euclidean distance between two states; angles compared on the circle.

    Setting ``w_robot=0`` restricts the comparison to the objects.
    """
    if len(a.objects) != len(b.objects):
        raise ValueError(f"object counts differ: {len(a.objects)} vs {len(b.objects)}")
    total = 0.0
    for p, q in zip(a.objects, b.objects):
        dth = wrap_angle(p.theta - q.theta)
        total += (p.x - q.x) ** 2 + (p.y - q.y) ** 2 + w_ang * dth * dth
    ra, rb = a.robot, b.robot
    drot = wrap_angle(ra.theta_rot - rb.theta_rot)
    total += w_robot * (
        (ra.theta_x - rb.theta_x) ** 2
        + (ra.theta_y - rb.theta_y) ** 2
        + w_ang * drot * drot
        + (ra.theta_grip - rb.theta_grip) ** 2
    )
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# Scene files

_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM = {"type": "number"}

SCENE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["table", "robot", "objects"],
    "properties": {
        "table": {
            "type": "object",
            "additionalProperties": False,
            "required": ["half_x", "half_y", "safe_margin"],
            "properties": {"half_x": _POS, "half_y": _POS, "safe_margin": _POS},
        },
        "robot": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "palm": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["half_depth", "half_width"],
                    "properties": {"half_depth": _POS, "half_width": _POS},
                },
                "finger": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["half_length", "half_width"],
                    "properties": {"half_length": _POS, "half_width": _POS},
                },
                "grip_min": _POS,
                "grip_max": _POS,
                "initial": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
            },
        },
        "objects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["shape", "mass", "friction", "pose"],
                "properties": {
                    "shape": {
                        "oneOf": [
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["circle"],
                                "properties": {
                                    "circle": {
                                        "type": "object",
                                        "additionalProperties": False,
                                        "required": ["radius"],
                                        "properties": {"radius": _POS},
                                    }
                                },
                            },
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["box"],
                                "properties": {
                                    "box": {
                                        "type": "object",
                                        "additionalProperties": False,
                                        "required": ["half_x", "half_y"],
                                        "properties": {"half_x": _POS, "half_y": _POS},
                                    }
                                },
                            },
                        ]
                    },
                    "mass": _POS,
                    "friction": _POS,
                    "pose": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                    "target": {"type": "boolean"},
                    "height": _POS,
                },
            },
        },
    },
}


def default_robot_initial(table: Table, geometry: RobotGeometry) -> RobotState:
    """Palm centred on the middle of the table's -x edge, facing +x, hand open."""
    return RobotState(-table.half_x, 0.0, 0.0, geometry.grip_max)


def scene_to_dict(scene: SceneSpec) -> dict:
    g = scene.robot
    objects = []
    for o in scene.objects:
        if isinstance(o.shape, Circle):
            shape = {"circle": {"radius": o.shape.radius}}
        else:
            shape = {"box": {"half_x": o.shape.half_x, "half_y": o.shape.half_y}}
        d = {"shape": shape, "mass": o.mass, "friction": o.friction, "pose": o.pose.as_list()}
        if o.is_target:
            d["target"] = True
        if o.height is not None:
            d["height"] = o.height
        objects.append(d)
    return {
        "table": {
            "half_x": scene.table.half_x,
            "half_y": scene.table.half_y,
            "safe_margin": scene.table.safe_margin,
        },
        "robot": {
            "palm": {"half_depth": g.palm_half_depth, "half_width": g.palm_half_width},
            "finger": {"half_length": g.finger_half_length, "half_width": g.finger_half_width},
            "grip_min": g.grip_min,
            "grip_max": g.grip_max,
            "initial": scene.robot_initial.as_list(),
        },
        "objects": objects,
    }


def scene_from_dict(data: dict) -> SceneSpec:
    """Build and validate a scene from its JSON document form."""
    validator = jsonschema.Draft202012Validator(SCENE_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SceneError(f"{where}: {e.message}")

    t = data["table"]
    table = Table(t["half_x"], t["half_y"], t["safe_margin"])
    r = data["robot"]
    geometry = RobotGeometry(
        palm_half_depth=r.get("palm", {}).get("half_depth", RobotGeometry.palm_half_depth),
        palm_half_width=r.get("palm", {}).get("half_width", RobotGeometry.palm_half_width),
        finger_half_length=r.get("finger", {}).get("half_length", RobotGeometry.finger_half_length),
        finger_half_width=r.get("finger", {}).get("half_width", RobotGeometry.finger_half_width),
        grip_min=r.get("grip_min", RobotGeometry.grip_min),
        grip_max=r.get("grip_max", RobotGeometry.grip_max),
    )
    if "initial" in r:
        robot_initial = RobotState(*map(float, r["initial"]))
    else:
        robot_initial = default_robot_initial(table, geometry)

    objects = []
    for o in data["objects"]:
        s = o["shape"]
        shape = Circle(s["circle"]["radius"]) if "circle" in s else Box(s["box"]["half_x"], s["box"]["half_y"])
        objects.append(
            ObjectSpec(
                shape=shape,
                mass=float(o["mass"]),
                friction=float(o["friction"]),
                pose=Pose2(*map(float, o["pose"])),
                is_target=bool(o.get("target", False)),
                height=o.get("height"),
            )
        )
    scene = SceneSpec(table, geometry, tuple(objects), robot_initial)
    validate_scene(scene)
    return scene


def validate_scene(scene: SceneSpec) -> None:
    """Check the semantic invariants the schema cannot express."""
    from .physics import footprint_extent, shapes_penetration

    t = scene.table
    if not 0 < t.safe_margin < min(t.half_x, t.half_y):
        raise SceneError(f"table/safe_margin: {t.safe_margin} not in (0, {min(t.half_x, t.half_y)})")
    g = scene.robot
    if g.grip_min > g.grip_max:
        raise SceneError("robot: grip_min exceeds grip_max")
    grip = scene.robot_initial.theta_grip
    if not g.grip_min <= grip <= g.grip_max:
        raise SceneError(f"robot/initial/3: grip {grip} outside [{g.grip_min}, {g.grip_max}]")

    targets = [i for i, o in enumerate(scene.objects) if o.is_target]
    if len(targets) != 1:
        raise SceneError(f"objects: expected exactly one target, found {len(targets)}")
    for i, o in enumerate(scene.objects):
        if o.mass <= 0 or o.friction <= 0:
            raise SceneError(f"objects/{i}: mass and friction must be positive")
        ex, ey = footprint_extent(o.shape, o.pose)
        if abs(o.pose.x) + ex > t.half_x or abs(o.pose.y) + ey > t.half_y:
            raise SceneError(f"objects/{i}/pose: footprint leaves the table")
    for i in range(len(scene.objects)):
        for j in range(i + 1, len(scene.objects)):
            a, b = scene.objects[i], scene.objects[j]
            if shapes_penetration(a.shape, a.pose, b.shape, b.pose) > 0.0:
                raise SceneError(f"objects/{i} and objects/{j} overlap")


def load_scene(path: str | Path) -> SceneSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON ({exc})") from exc
    return scene_from_dict(data)


def save_scene(scene: SceneSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2))


def make_scene(
    objects: Sequence[ObjectSpec],
    table: Table | None = None,
    robot: RobotGeometry | None = None,
    robot_initial: RobotState | None = None,
    validate: bool = True,
) -> SceneSpec:
    """Convenience constructor filling in default table and gripper."""
    table = table or Table()
    robot = robot or RobotGeometry()
    robot_initial = robot_initial or default_robot_initial(table, robot)
    scene = SceneSpec(table, robot, tuple(objects), robot_initial)
    if validate:
        validate_scene(scene)
    return scene


def with_robot(state: WorldState, **changes) -> WorldState:
    return replace(state, robot=replace(state.robot, **changes))


def with_object(state: WorldState, index: int, pose: Pose2) -> WorldState:
    objects = list(state.objects)
    objects[index] = pose
    return replace(state, objects=tuple(objects))


ZERO_CONTROL = Control()

__all__ = [
    "Box",
    "Circle",
    "Control",
    "ControlLimits",
    "CostBreakdown",
    "ObjectSpec",
    "Plan",
    "Pose2",
    "RobotGeometry",
    "RobotState",
    "SceneError",
    "SceneSpec",
    "Table",
    "WorldState",
    "ZERO_CONTROL",
    "load_scene",
    "make_scene",
    "save_scene",
    "scene_from_dict",
    "scene_to_dict",
    "state_deviation",
    "wrap_angle",
]
