"""Random scene generation, planning-world perturbation and execution-noise levels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .physics import NoiseSpec, footprint_extent, robot_penetration, settle, shapes_penetration
from .world import (
    Box,
    Circle,
    ObjectSpec,
    Pose2,
    RobotGeometry,
    RobotState,
    SceneError,
    SceneSpec,
    Table,
    default_robot_initial,
)


class UncertaintyLevel(str, enum.Enum):
    NONE = "none"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def multiplier(self) -> int:
        return _MULTIPLIER[self]

    @property
    def beta(self) -> float:
        return _BETA[self]

    @classmethod
    def parse(cls, name: str | UncertaintyLevel) -> UncertaintyLevel:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown uncertainty level {name!r}; choose from none, low, medium, high") from None


_MULTIPLIER = {UncertaintyLevel.NONE: 0, UncertaintyLevel.LOW: 1, UncertaintyLevel.MEDIUM: 2, UncertaintyLevel.HIGH: 3}
_BETA = {UncertaintyLevel.NONE: 0.0, UncertaintyLevel.LOW: 0.003, UncertaintyLevel.MEDIUM: 0.006, UncertaintyLevel.HIGH: 0.009}

LEVELS = tuple(UncertaintyLevel)


def _check_range(name: str, r: tuple[float, float]) -> None:
    lo, hi = r
    if not 0 < lo <= hi:
        raise ValueError(f"{name} range {r} must satisfy 0 < low <= high")


@dataclass(frozen=True)
class SceneGenParams:
    object_count: int = 6
    table: Table = field(default_factory=Table)
    robot: RobotGeometry = field(default_factory=RobotGeometry)
    box_half_extent: tuple[float, float] = (0.03, 0.05)
    box_height: tuple[float, float] = (0.036, 0.04)
    circle_radius: tuple[float, float] = (0.035, 0.04)
    circle_height: tuple[float, float] = (0.04, 0.055)
    mass: tuple[float, float] = (0.2, 0.8)
    friction: tuple[float, float] = (0.2, 0.6)
    target_variance: float = 0.01
    clearance: float = 0.002
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.object_count < 1:
            raise ValueError("object_count must be at least 1")
        for name in ("box_half_extent", "box_height", "circle_radius", "circle_height", "mass", "friction"):
            _check_range(name, getattr(self, name))
        if self.target_variance <= 0 or self.clearance < 0 or self.max_attempts < 1:
            raise ValueError("target_variance must be positive, clearance non-negative, max_attempts >= 1")


@dataclass(frozen=True)
class PerturbVariances:
    """Per-unit-multiplier variances of the planning-world errors, plus validity floors."""

    translation: float = 0.005
    rotation: float = 0.005
    dimension: float = 0.005
    mass: float = 0.01
    friction: float = 0.005
    min_dimension: float = 0.001
    min_mass: float = 0.01
    min_friction: float = 0.05


def _random_shape(p: SceneGenParams, rng: np.random.Generator):
    if rng.random() < 0.5:
        shape = Box(float(rng.uniform(*p.box_half_extent)), float(rng.uniform(*p.box_half_extent)))
        height = float(rng.uniform(*p.box_height))
    else:
        shape = Circle(float(rng.uniform(*p.circle_radius)))
        height = float(rng.uniform(*p.circle_height))
    return shape, height


def _fits(shape, pose, placed, robot_initial, p: SceneGenParams) -> bool:
    ex, ey = footprint_extent(shape, pose)
    t = p.table
    if abs(pose.x) + ex > t.half_x or abs(pose.y) + ey > t.half_y:
        return False
    # Inflate by the clearance so neighbours keep a gap.
    grown = _inflate(shape, p.clearance)
    if robot_penetration(robot_initial, p.robot, grown, pose) > 0.0:
        return False
    return all(shapes_penetration(grown, pose, o.shape, o.pose) <= 0.0 for o in placed)


def _inflate(shape, by: float):
    if by == 0:
        return shape
    if isinstance(shape, Circle):
        return Circle(shape.radius + by)
    return Box(shape.half_x + by, shape.half_y + by)


def generate_scene(
    params: SceneGenParams = SceneGenParams(),
    rng: np.random.Generator | int | None = None,
    robot_initial: RobotState | None = None,
) -> SceneSpec:
    """Random cluttered scene; object 0 is the target, placed near the table centre."""
    rng = np.random.default_rng(rng)
    p = params
    robot_initial = robot_initial or default_robot_initial(p.table, p.robot)
    t = p.table
    sd = math.sqrt(p.target_variance)
    placed: list[ObjectSpec] = []
    for i in range(p.object_count):
        shape, height = _random_shape(p, rng)
        mass = float(rng.uniform(*p.mass))
        friction = float(rng.uniform(*p.friction))
        for _ in range(p.max_attempts):
            theta = float(rng.uniform(-math.pi, math.pi))
            if i == 0:
                x, y = rng.normal(0.0, sd, size=2)
            else:
                r = shape.bounding_radius
                x = rng.uniform(-t.half_x + r, t.half_x - r) if t.half_x > r else 0.0
                y = rng.uniform(-t.half_y + r, t.half_y - r) if t.half_y > r else 0.0
            pose = Pose2(float(x), float(y), theta)
            if _fits(shape, pose, placed, robot_initial, p):
                break
        else:
            raise SceneError(f"could not place object {i} after {p.max_attempts} attempts")
        placed.append(ObjectSpec(shape, mass, friction, pose, is_target=(i == 0), height=height))
    return SceneSpec(t, p.robot, tuple(placed), robot_initial)


def perturb_scene(
    scene: SceneSpec,
    level: UncertaintyLevel | str,
    rng: np.random.Generator | int | None = None,
    variances: PerturbVariances = PerturbVariances(),
    relax: bool = True,
) -> SceneSpec:
    """The planner's (wrong) model of ``scene`` at the given uncertainty level.

    Every object draws the same eight standard normals whatever the level, so
    larger multipliers push each parameter further along the same direction.
    Centroids are kept on the table and, with ``relax``, overlaps created by
    the pose errors are pushed apart so the model starts penetration free.
    """
    level = UncertaintyLevel.parse(level)
    m = level.multiplier
    if m == 0:
        return scene
    rng = np.random.default_rng(rng)
    v = variances
    sd = {k: math.sqrt(getattr(v, k) * m) for k in ("translation", "rotation", "dimension", "mass", "friction")}
    t = scene.table
    out = []
    for o in scene.objects:
        z = rng.standard_normal(8)
        pose = Pose2(
            float(np.clip(o.pose.x + sd["translation"] * z[0], -t.half_x, t.half_x)),
            float(np.clip(o.pose.y + sd["translation"] * z[1], -t.half_y, t.half_y)),
            float(o.pose.theta + sd["rotation"] * z[2]),
        )
        dim = lambda a, k: float(max(a + sd["dimension"] * z[k], v.min_dimension))  # noqa: E731
        if isinstance(o.shape, Circle):
            shape = Circle(dim(o.shape.radius, 3))
        else:
            shape = Box(dim(o.shape.half_x, 3), dim(o.shape.half_y, 4))
        height = dim(o.height, 5) if o.height is not None else None
        out.append(
            replace(
                o,
                shape=shape,
                pose=pose,
                height=height,
                mass=float(max(o.mass + sd["mass"] * z[6], v.min_mass)),
                friction=float(max(o.friction + sd["friction"] * z[7], v.min_friction)),
            )
        )
    perturbed = replace(scene, objects=tuple(out))
    return settle(perturbed) if relax else perturbed


def noise_spec(
    level: UncertaintyLevel | str,
    rng: np.random.Generator | int | None = None,
    robot: bool = True,
    beta: tuple[float, float, float] | None = None,
    ref_dt: float | None = 1.0,
) -> NoiseSpec:
    """Execution-world velocity noise for a level; ``beta`` overrides per component."""
    level = UncertaintyLevel.parse(level)
    if beta is None:
        b = level.beta
        beta = (b, b, b)
    if not any(beta):
        return NoiseSpec(beta=(0.0, 0.0, 0.0), rng=None, robot=robot, ref_dt=ref_dt)
    return NoiseSpec(tuple(float(x) for x in beta), np.random.default_rng(rng), robot, ref_dt)
