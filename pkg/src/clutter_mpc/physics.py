"""Planar quasi-static pushing simulator.

The robot is kinematic: it follows its commanded joint velocities exactly (plus
optional noise). Objects only move when something pushes into them. Each control
is integrated over a fixed number of substeps; after moving the robot, overlaps
are removed by Gauss-Seidel position projection over all contact pairs, which
lets pushes propagate through chains of touching objects.

Displacement response of a pushed object follows an ellipsoidal limit-surface
approximation: a push at contact point ``p`` along normal ``n`` translates the
object along ``n`` and turns it by ``cross(p - c, n) / rho**2`` per unit push,
with ``rho`` the footprint's radius of gyration. Between two objects the
correction is split by mobility ``clamp(F_REF / friction, 0.25, 1)``, so a
grippier object yields less. Mass plays no role in this model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numba
import numpy as np

from .world import (
    Circle,
    Control,
    ObjectShape,
    Pose2,
    RobotGeometry,
    RobotState,
    SceneSpec,
    WorldState,
)

F_REF = 0.4
MOBILITY_MIN = 0.25
NO_CONTACT = -1.0


@dataclass(frozen=True)
class PhysicsParams:
    substeps: int = 10
    iterations: int = 20
    tolerance: float = 1e-4  # sweep convergence, max depth in metres
    max_penetration: float = 1e-3  # substeps leaving more than this are rolled back


DEFAULT_PHYSICS = PhysicsParams()


@dataclass
class NoiseSpec:
    """Gaussian velocity noise injected at every substep.

    ``beta`` holds variances for (v_x, v_y, angular velocity), shared by the
    robot and every object. Objects only receive noise on substeps where they
    are being pushed; a resting object stays at rest.

    A raw draw ``mu ~ N(0, beta)`` is applied over a substep of length h as the
    displacement ``mu * sqrt(ref_dt * h)``. Summed over a control of length T
    this is a random walk with variance ``beta * ref_dt * T``; the default
    ``ref_dt = 1`` gives variance beta per second. ``ref_dt = None`` applies
    ``mu`` as a plain velocity (displacement ``mu * h``).
    """

    beta: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rng: np.random.Generator | None = None
    robot: bool = True
    ref_dt: float | None = 1.0

    @property
    def active(self) -> bool:
        return any(b > 0.0 for b in self.beta)

    def draw(self, substeps: int, bodies: int, dt: float | None = None) -> np.ndarray:
        """Effective velocity noise of shape (substeps, bodies, 3); body 0 is the robot.

        Without ``dt`` the raw N(0, beta) draws are returned unscaled.
        """
        if self.rng is None:
            raise ValueError("noise with beta > 0 needs an rng")
        z = self.rng.standard_normal((substeps, bodies, 3))
        scale = np.sqrt(np.asarray(self.beta, dtype=float))
        if self.ref_dt is not None and dt is not None:
            scale = scale * math.sqrt(self.ref_dt / dt)
        out = z * scale
        if not self.robot:
            out[:, 0, :] = 0.0
        return out


NO_NOISE = NoiseSpec()


# ---------------------------------------------------------------------------
# Geometry kernels. Shapes: kind 0 = circle (a = radius), kind 1 = box (a, b = half extents).


@numba.njit(cache=True)
def _wrap(t):
    if -math.pi < t <= math.pi:
        return t
    r = t - 2.0 * math.pi * math.floor((t + math.pi) / (2.0 * math.pi))
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@numba.njit(cache=True)
def _circle_circle(xa, ya, ra, xb, yb, rb):
    dx = xb - xa
    dy = yb - ya
    d = math.sqrt(dx * dx + dy * dy)
    depth = ra + rb - d
    if depth <= 0.0:
        return 0.0, 0.0, NO_CONTACT, 0.0, 0.0
    if d > 0.0:
        nx = dx / d
        ny = dy / d
    else:
        nx = 1.0
        ny = 0.0
    px = xa + nx * (ra - 0.5 * depth)
    py = ya + ny * (ra - 0.5 * depth)
    return nx, ny, depth, px, py


@numba.njit(cache=True)
def _box_circle(bx, by, bt, hx, hy, cx, cy, r):
    """Contact with normal pointing from the box to the circle."""
    c = math.cos(bt)
    s = math.sin(bt)
    dx = cx - bx
    dy = cy - by
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    if lx != qx or ly != qy:
        ex = lx - qx
        ey = ly - qy
        d = math.sqrt(ex * ex + ey * ey)
        depth = r - d
        if depth <= 0.0:
            return 0.0, 0.0, NO_CONTACT, 0.0, 0.0
        nlx = ex / d
        nly = ey / d
    else:
        fx = hx - abs(lx)
        fy = hy - abs(ly)
        if fx <= fy:
            nlx = 1.0 if lx >= 0.0 else -1.0
            nly = 0.0
            depth = r + fx
            qx = nlx * hx
        else:
            nlx = 0.0
            nly = 1.0 if ly >= 0.0 else -1.0
            depth = r + fy
            qy = nly * hy
    nx = c * nlx - s * nly
    ny = s * nlx + c * nly
    px = bx + c * qx - s * qy
    py = by + s * qx + c * qy
    return nx, ny, depth, px, py


@numba.njit(cache=True)
def _box_box(xa, ya, ta, ha, ka, xb, yb, tb, hb, kb):
    """Separating-axis test between two oriented boxes; normal points from A to B."""
    ca = math.cos(ta)
    sa = math.sin(ta)
    cb = math.cos(tb)
    sb = math.sin(tb)
    axes = np.empty((4, 2))
    axes[0, 0] = ca
    axes[0, 1] = sa
    axes[1, 0] = -sa
    axes[1, 1] = ca
    axes[2, 0] = cb
    axes[2, 1] = sb
    axes[3, 0] = -sb
    axes[3, 1] = cb
    dx = xb - xa
    dy = yb - ya
    best = 1e300
    bi = -1
    nx = 0.0
    ny = 0.0
    for i in range(4):
        ux = axes[i, 0]
        uy = axes[i, 1]
        ra = ha * abs(ca * ux + sa * uy) + ka * abs(-sa * ux + ca * uy)
        rb = hb * abs(cb * ux + sb * uy) + kb * abs(-sb * ux + cb * uy)
        dist = dx * ux + dy * uy
        overlap = ra + rb - abs(dist)
        if overlap <= 0.0:
            return 0.0, 0.0, NO_CONTACT, 0.0, 0.0
        if overlap < best:
            best = overlap
            bi = i
            if dist >= 0.0:
                nx = ux
                ny = uy
            else:
                nx = -ux
                ny = -uy
    # Incident corners: B's corners deepest into A when A owns the axis, and vice versa.
    if bi < 2:
        x0, y0, c0, s0, h0, k0, sign = xb, yb, cb, sb, hb, kb, -1.0
        xr, yr, cr, sr, hr, kr = xa, ya, ca, sa, ha, ka
    else:
        x0, y0, c0, s0, h0, k0, sign = xa, ya, ca, sa, ha, ka, 1.0
        xr, yr, cr, sr, hr, kr = xb, yb, cb, sb, hb, kb
    proj = np.empty(4)
    cx = np.empty(4)
    cy = np.empty(4)
    m = 0
    for i in (-1.0, 1.0):
        for j in (-1.0, 1.0):
            px = x0 + c0 * i * h0 - s0 * j * k0
            py = y0 + s0 * i * h0 + c0 * j * k0
            cx[m] = px
            cy[m] = py
            proj[m] = sign * (px * nx + py * ny)
            m += 1
    top = proj.max()
    sx = 0.0
    sy = 0.0
    cnt = 0
    lo = 1e300
    hi = -1e300
    for i in range(4):
        if proj[i] >= top - 1e-6:
            sx += cx[i]
            sy += cy[i]
            cnt += 1
            u = -ny * cx[i] + nx * cy[i]
            lo = min(lo, u)
            hi = max(hi, u)
    sx /= cnt
    sy /= cnt
    if cnt > 1:
        # Edge on face: centre the contact on the part of the edge the face covers.
        ur = -ny * xr + nx * yr
        er = hr * abs(-cr * ny + sr * nx) + kr * abs(sr * ny + cr * nx)
        a = max(lo, ur - er)
        b = min(hi, ur + er)
        if a <= b:
            shift = 0.5 * (a + b) - 0.5 * (lo + hi)
            sx -= ny * shift
            sy += nx * shift
    return nx, ny, best, sx, sy


@numba.njit(cache=True)
def _contact(ka, xa, ya, ta, aa, ba, kb, xb, yb, tb, ab, bb):
    if ka == 0 and kb == 0:
        return _circle_circle(xa, ya, aa, xb, yb, ab)
    if ka == 1 and kb == 0:
        return _box_circle(xa, ya, ta, aa, ba, xb, yb, ab)
    if ka == 0 and kb == 1:
        nx, ny, d, px, py = _box_circle(xb, yb, tb, ab, bb, xa, ya, aa)
        return -nx, -ny, d, px, py
    return _box_box(xa, ya, ta, aa, ba, xb, yb, tb, ab, bb)


@numba.njit(cache=True)
def _links(robot, geo, out):
    """Write the palm and both fingers as boxes (x, y, theta, half_x, half_y)."""
    x = robot[0]
    y = robot[1]
    t = robot[2]
    grip = robot[3]
    c = math.cos(t)
    s = math.sin(t)
    palm_hd, palm_hw, fin_hl, fin_hw = geo[0], geo[1], geo[2], geo[3]
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = t
    out[0, 3] = palm_hd
    out[0, 4] = palm_hw
    fx = palm_hd + fin_hl
    for k in range(2):
        fy = (grip + fin_hw) * (1.0 if k == 0 else -1.0)
        out[1 + k, 0] = x + c * fx - s * fy
        out[1 + k, 1] = y + s * fx + c * fy
        out[1 + k, 2] = t
        out[1 + k, 3] = fin_hl
        out[1 + k, 4] = fin_hw


@numba.njit(cache=True)
def _push(obj, i, nx, ny, depth, px, py, rho2, share):
    """Move object i along +n so its contact point advances by share * depth."""
    rn = (px - obj[i, 0]) * ny - (py - obj[i, 1]) * nx
    s = share * depth / (1.0 + rn * rn / rho2[i])
    obj[i, 0] += s * nx
    obj[i, 1] += s * ny
    obj[i, 2] += s * rn / rho2[i]


@numba.njit(cache=True)
def _sweep(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, apply):
    """One Gauss-Seidel pass in fixed order: links vs objects, then object pairs.

    Returns the deepest overlap found. With ``apply`` false nothing moves.
    """
    n = obj.shape[0]
    maxd = 0.0
    # Link pushes on one object are summed from the same pose, so symmetric
    # finger contacts cancel instead of depending on link order.
    for i in range(n):
        if dropped[i]:
            continue
        ax = 0.0
        ay = 0.0
        at = 0.0
        hit = False
        for L in range(3):
            lx = links[L, 0]
            ly = links[L, 1]
            lr = math.sqrt(links[L, 3] ** 2 + links[L, 4] ** 2)
            dx = obj[i, 0] - lx
            dy = obj[i, 1] - ly
            reach = lr + brad[i]
            if dx * dx + dy * dy >= reach * reach:
                continue
            nx, ny, d, px, py = _contact(
                1, lx, ly, links[L, 2], links[L, 3], links[L, 4],
                kind[i], obj[i, 0], obj[i, 1], obj[i, 2], ha[i], hb[i],
            )
            if d <= 0.0:
                continue
            if d > maxd:
                maxd = d
            rn = (px - obj[i, 0]) * ny - (py - obj[i, 1]) * nx
            sc = d / (1.0 + rn * rn / rho2[i])
            ax += sc * nx
            ay += sc * ny
            at += sc * rn / rho2[i]
            hit = True
        if apply and hit:
            obj[i, 0] += ax
            obj[i, 1] += ay
            obj[i, 2] += at
            moved[i] = True
    for i in range(n):
        if dropped[i]:
            continue
        for j in range(i + 1, n):
            if dropped[j]:
                continue
            dx = obj[j, 0] - obj[i, 0]
            dy = obj[j, 1] - obj[i, 1]
            reach = brad[i] + brad[j]
            if dx * dx + dy * dy >= reach * reach:
                continue
            nx, ny, d, px, py = _contact(
                kind[i], obj[i, 0], obj[i, 1], obj[i, 2], ha[i], hb[i],
                kind[j], obj[j, 0], obj[j, 1], obj[j, 2], ha[j], hb[j],
            )
            if d <= 0.0:
                continue
            if d > maxd:
                maxd = d
            if apply:
                rni = (px - obj[i, 0]) * ny - (py - obj[i, 1]) * nx
                rnj = (px - obj[j, 0]) * ny - (py - obj[j, 1]) * nx
                wi = mob[i] * (1.0 + rni * rni / rho2[i])
                wj = mob[j] * (1.0 + rnj * rnj / rho2[j])
                _push(obj, i, -nx, -ny, d, px, py, rho2, wi / (wi + wj))
                _push(obj, j, nx, ny, d, px, py, rho2, wj / (wi + wj))
                moved[i] = True
                moved[j] = True
    return maxd


@numba.njit(cache=True)
def _resolve(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, iterations, tol):
    for _ in range(iterations):
        if _sweep(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, True) <= tol:
            break
    return _sweep(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, False)


@numba.njit(cache=True)
def _advance(robot, obj, dropped, u, duration, noise, use_noise,
             kind, ha, hb, mob, rho2, brad, geo, table, iterations, tol, max_pen):
    """Integrate one control in place over ``noise.shape[0]`` substeps."""
    substeps = noise.shape[0]
    n = obj.shape[0]
    dt = duration / substeps
    links = np.empty((3, 5))
    moved = np.zeros(n, dtype=np.bool_)
    robot_prev = np.empty(4)
    obj_prev = np.empty_like(obj)
    # Overlap already present is not the robot's doing and must not stall it.
    _links(robot, geo, links)
    base = _sweep(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, False)
    for s in range(substeps):
        robot_prev[:] = robot
        obj_prev[:, :] = obj
        if use_noise:
            robot[0] += (u[0] + noise[s, 0, 0]) * dt
            robot[1] += (u[1] + noise[s, 0, 1]) * dt
            robot[2] += (u[2] + noise[s, 0, 2]) * dt
        else:
            robot[0] += u[0] * dt
            robot[1] += u[1] * dt
            robot[2] += u[2] * dt
        robot[3] = min(max(robot[3] + u[3] * dt, geo[4]), geo[5])
        _links(robot, geo, links)
        moved[:] = False
        pen = _resolve(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, iterations, tol)
        if use_noise:
            pushed = False
            for i in range(n):
                if moved[i]:
                    obj[i, 0] += noise[s, i + 1, 0] * dt
                    obj[i, 1] += noise[s, i + 1, 1] * dt
                    obj[i, 2] += noise[s, i + 1, 2] * dt
                    pushed = True
            if pushed:
                pen = _resolve(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, iterations, tol)
        if pen > max_pen and pen > base + tol:
            # Jammed: the robot stalls for this substep.
            robot[:] = robot_prev
            obj[:, :] = obj_prev
        else:
            base = pen
        robot[2] = _wrap(robot[2])
        for i in range(n):
            obj[i, 2] = _wrap(obj[i, 2])
            if not dropped[i] and (abs(obj[i, 0]) > table[0] or abs(obj[i, 1]) > table[1]):
                dropped[i] = True


@numba.njit(cache=True)
def _max_penetration(robot, obj, dropped, kind, ha, hb, mob, rho2, brad, geo):
    links = np.empty((3, 5))
    _links(robot, geo, links)
    moved = np.zeros(obj.shape[0], dtype=np.bool_)
    return _sweep(links, obj, dropped, kind, ha, hb, mob, rho2, brad, moved, False)


# ---------------------------------------------------------------------------
# Python-side plumbing


def _shape_row(shape: ObjectShape):
    if isinstance(shape, Circle):
        r = shape.radius
        return 0, r, r, 0.5 * r * r, r
    hx, hy = shape.half_x, shape.half_y
    return 1, hx, hy, (hx * hx + hy * hy) / 3.0, math.hypot(hx, hy)


@dataclass(frozen=True)
class _Compiled:
    kind: np.ndarray
    ha: np.ndarray
    hb: np.ndarray
    mob: np.ndarray
    rho2: np.ndarray
    brad: np.ndarray
    geo: np.ndarray
    table: np.ndarray


def mobility(friction: float) -> float:
    return min(max(F_REF / friction, MOBILITY_MIN), 1.0)


@lru_cache(maxsize=512)
def _compile(scene: SceneSpec) -> _Compiled:
    rows = [_shape_row(o.shape) for o in scene.objects]
    g = scene.robot
    return _Compiled(
        kind=np.array([r[0] for r in rows], dtype=np.int64),
        ha=np.array([r[1] for r in rows], dtype=float),
        hb=np.array([r[2] for r in rows], dtype=float),
        mob=np.array([mobility(o.friction) for o in scene.objects], dtype=float),
        rho2=np.array([r[3] for r in rows], dtype=float),
        brad=np.array([r[4] for r in rows], dtype=float),
        geo=np.array(
            [g.palm_half_depth, g.palm_half_width, g.finger_half_length, g.finger_half_width, g.grip_min, g.grip_max]
        ),
        table=np.array([scene.table.half_x, scene.table.half_y]),
    )


class _Sim:
    """Mutable array view of a WorldState, advanced control by control."""

    def __init__(self, state: WorldState, scene: SceneSpec, noise: NoiseSpec, params: PhysicsParams):
        if len(state.objects) != len(scene.objects):
            raise ValueError("state and scene disagree on object count")
        self.c = _compile(scene)
        self.robot = np.array(state.robot.as_list(), dtype=float)
        self.obj = np.array([p.as_list() for p in state.objects], dtype=float).reshape(-1, 3)
        self.dropped = np.array(state.dropped, dtype=np.bool_)
        self.noise = noise
        self.params = params
        self._quiet = np.zeros((params.substeps, len(state.objects) + 1, 3))

    def advance(self, u: Control) -> None:
        p = self.params
        if self.noise.active:
            nz, use = self.noise.draw(p.substeps, self.obj.shape[0] + 1, u.duration / p.substeps), True
        else:
            nz, use = self._quiet, False
        c = self.c
        _advance(
            self.robot, self.obj, self.dropped,
            np.array(u.velocities(), dtype=float), float(u.duration), nz, use,
            c.kind, c.ha, c.hb, c.mob, c.rho2, c.brad, c.geo, c.table,
            p.iterations, p.tolerance, p.max_penetration,
        )

    def state(self) -> WorldState:
        r = self.robot
        return WorldState(
            robot=RobotState(float(r[0]), float(r[1]), float(r[2]), float(r[3])),
            objects=tuple(Pose2(float(x), float(y), float(t)) for x, y, t in self.obj),
            dropped=tuple(bool(d) for d in self.dropped),
        )


def step(
    state: WorldState,
    u: Control,
    scene: SceneSpec,
    noise: NoiseSpec = NO_NOISE,
    params: PhysicsParams = DEFAULT_PHYSICS,
) -> WorldState:
    """Advance the world by one control."""
    sim = _Sim(state, scene, noise, params)
    sim.advance(u)
    return sim.state()


def rollout(
    x0: WorldState,
    controls: Sequence[Control],
    scene: SceneSpec,
    noise: NoiseSpec = NO_NOISE,
    stop: Callable[[int, list[WorldState]], bool] | None = None,
    params: PhysicsParams = DEFAULT_PHYSICS,
) -> list[WorldState]:
    """Simulate a control sequence; ``states[t + 1]`` follows ``controls[t]``.

    ``stop(t, states)`` is called after each step and can end the rollout early.
    """
    states = [x0]
    if not controls:
        return states
    sim = _Sim(x0, scene, noise, params)
    for t, u in enumerate(controls):
        sim.advance(u)
        states.append(sim.state())
        if stop is not None and stop(t, states):
            break
    return states


def relax(
    state: WorldState,
    scene: SceneSpec,
    iterations: int = 500,
    params: PhysicsParams = DEFAULT_PHYSICS,
    robot: bool = True,
) -> WorldState:
    """Push overlapping objects apart (and out of the gripper) without moving the robot.

    A state observed in one world can overlap when read against another
    world's shapes; this gives the nearest penetration-free arrangement the
    solver finds. Objects squeezed past the table edge come back dropped.
    """
    c = _compile(scene)
    sim = _Sim(state, scene, NO_NOISE, params)
    links = np.empty((3, 5))
    _links(sim.robot, c.geo, links)
    if not robot:
        # Park the links far away so only object pairs interact.
        links[:, 0] = 1e6
    moved = np.zeros(sim.obj.shape[0], dtype=np.bool_)
    tol = params.tolerance * 1e-2
    _resolve(links, sim.obj, sim.dropped, c.kind, c.ha, c.hb, c.mob, c.rho2, c.brad, moved, iterations, tol)
    if not moved.any():
        return state
    if robot:
        _slide_out(sim, c, links, moved, iterations, tol, params.max_penetration)
    # Whatever could not be fitted on the table leaves the model.
    off = (np.abs(sim.obj[:, 0]) > c.table[0]) | (np.abs(sim.obj[:, 1]) > c.table[1])
    sim.dropped |= off
    for i in range(sim.obj.shape[0]):
        sim.obj[i, 2] = _wrap(sim.obj[i, 2])
    return sim.state()


def _link_depth(links, obj, c, i) -> float:
    return max(
        _contact(1, *links[L, :5], c.kind[i], *obj[i], c.ha[i], c.hb[i])[2] for L in range(3)
    )


def _slide_out(sim, c, links, moved, iterations, tol, max_pen, rounds=3) -> None:
    """Push objects wedged between the fingers forward until the gripper is clear.

    Lateral finger contacts cancel on an object wider than the opening, so the
    contact solver alone leaves it stuck.
    """
    fx, fy = math.cos(sim.robot[2]), math.sin(sim.robot[2])
    for _ in range(rounds):
        stuck = [i for i in range(sim.obj.shape[0])
                 if not sim.dropped[i] and _link_depth(links, sim.obj, c, i) > max_pen]
        if not stuck:
            return
        for i in stuck:
            for _ in range(400):
                if _link_depth(links, sim.obj, c, i) <= max_pen:
                    break
                sim.obj[i, 0] += 0.0025 * fx
                sim.obj[i, 1] += 0.0025 * fy
        _resolve(links, sim.obj, sim.dropped, c.kind, c.ha, c.hb, c.mob, c.rho2, c.brad, moved, iterations, tol)


def settle(scene: SceneSpec, iterations: int = 500, params: PhysicsParams = DEFAULT_PHYSICS) -> SceneSpec:
    """The scene with its initial object poses relaxed as in :func:`relax`."""
    x = relax(scene.initial_state(), scene, iterations, params)
    objects = tuple(replace(o, pose=p) for o, p in zip(scene.objects, x.objects))
    return replace(scene, objects=objects)


# ---------------------------------------------------------------------------
# Queries on states


def gripper_axes(robot: RobotState) -> tuple[float, float]:
    return math.cos(robot.theta_rot), math.sin(robot.theta_rot)


def reference_point(robot: RobotState, geometry: RobotGeometry) -> tuple[float, float]:
    """Midpoint of the palm's inner face in world coordinates."""
    c, s = gripper_axes(robot)
    d = geometry.reference_offset
    return robot.theta_x + c * d, robot.theta_y + s * d


def to_gripper_frame(robot: RobotState, x: float, y: float) -> tuple[float, float]:
    c, s = gripper_axes(robot)
    dx, dy = x - robot.theta_x, y - robot.theta_y
    return c * dx + s * dy, -s * dx + c * dy


def gripper_links(robot: RobotState, geometry: RobotGeometry) -> list[tuple[float, float, float, float, float]]:
    """Palm, left finger, right finger as (x, y, theta, half_x, half_y)."""
    g = geometry
    out = np.empty((3, 5))
    geo = np.array([g.palm_half_depth, g.palm_half_width, g.finger_half_length, g.finger_half_width, g.grip_min, g.grip_max])
    _links(np.array(robot.as_list(), dtype=float), geo, out)
    return [tuple(float(v) for v in row) for row in out]


def is_grasped(state: WorldState, scene: SceneSpec) -> bool:
    """Target centroid inside the closed region between the fingers, not dropped."""
    k = scene.target_index
    if state.dropped[k]:
        return False
    g = scene.robot
    p = state.objects[k]
    lx, ly = to_gripper_frame(state.robot, p.x, p.y)
    return g.palm_half_depth <= lx <= g.reach and abs(ly) <= state.robot.theta_grip


def dropped_any_nontarget(state: WorldState, scene: SceneSpec) -> bool:
    k = scene.target_index
    return any(d for i, d in enumerate(state.dropped) if i != k)


def target_dropped(state: WorldState, scene: SceneSpec) -> bool:
    return state.dropped[scene.target_index]


def max_penetration(state: WorldState, scene: SceneSpec) -> float:
    """Deepest overlap among all robot-object and object-object pairs."""
    c = _compile(scene)
    return float(
        _max_penetration(
            np.array(state.robot.as_list(), dtype=float),
            np.array([p.as_list() for p in state.objects], dtype=float).reshape(-1, 3),
            np.array(state.dropped, dtype=np.bool_),
            c.kind, c.ha, c.hb, c.mob, c.rho2, c.brad, c.geo,
        )
    )


def shapes_penetration(a: ObjectShape, pa: Pose2, b: ObjectShape, pb: Pose2) -> float:
    """Overlap depth of two placed shapes; zero when they are apart or touching."""
    ka, aa, ba, _, _ = _shape_row(a)
    kb, ab, bb, _, _ = _shape_row(b)
    d = _contact(ka, pa.x, pa.y, pa.theta, aa, ba, kb, pb.x, pb.y, pb.theta, ab, bb)[2]
    return max(float(d), 0.0)


def robot_penetration(robot: RobotState, geometry: RobotGeometry, shape: ObjectShape, pose: Pose2) -> float:
    k, a, b, _, _ = _shape_row(shape)
    worst = 0.0
    for x, y, t, hx, hy in gripper_links(robot, geometry):
        d = _contact(1, x, y, t, hx, hy, k, pose.x, pose.y, pose.theta, a, b)[2]
        worst = max(worst, float(d))
    return worst


def footprint_extent(shape: ObjectShape, pose: Pose2) -> tuple[float, float]:
    """Half-widths of the axis-aligned bounding box of a placed shape."""
    if isinstance(shape, Circle):
        return shape.radius, shape.radius
    c, s = abs(math.cos(pose.theta)), abs(math.sin(pose.theta))
    return c * shape.half_x + s * shape.half_y, s * shape.half_x + c * shape.half_y


__all__ = [
    "DEFAULT_PHYSICS",
    "relax",
    "settle",
    "NO_NOISE",
    "NoiseSpec",
    "PhysicsParams",
    "dropped_any_nontarget",
    "footprint_extent",
    "gripper_links",
    "is_grasped",
    "max_penetration",
    "mobility",
    "reference_point",
    "rollout",
    "shapes_penetration",
    "step",
    "target_dropped",
]
