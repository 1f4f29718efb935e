import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clutter_mpc.cost import (
    CostAccumulator,
    CostWeights,
    acceleration_cost,
    disturbance_cost,
    edge_cost,
    goal_cost,
    goal_terms,
    recompute_total,
    trajectory_cost,
)
from clutter_mpc.physics import rollout
from clutter_mpc.world import Control, Pose2, RobotState, WorldState, make_scene, with_object

from conftest import box, circle

W = CostWeights()


def _goal_scene(d, phi, theta=0.0):
    """Robot facing ``theta``, target at range d and bearing phi from the reference point."""
    robot = RobotState(-0.25, 0.0, theta, 0.06)
    scene = make_scene([circle(0.25, 0.25, 0.03, target=True)], robot_initial=robot)
    off = scene.robot.reference_offset
    rx, ry = robot.theta_x + off * math.cos(theta), robot.theta_y + off * math.sin(theta)
    target = Pose2(rx + d * math.cos(theta + phi), ry + d * math.sin(theta + phi))
    return scene, with_object(scene.initial_state(), 0, target)


def test_goal_examples():
    scene, x = _goal_scene(0.0, 0.0)
    assert goal_cost(x, scene) == 0.0
    scene, x = _goal_scene(0.1, 0.2)
    assert goal_cost(x, scene) == pytest.approx(0.05, rel=1e-9)
    scene, x = _goal_scene(0.1, math.pi)
    assert goal_cost(x, scene) == pytest.approx(0.01 + math.pi**2, rel=1e-9)


@given(st.floats(0.0, 0.2), st.floats(-3.1, 3.1), st.floats(-3.1, 3.1))
def test_goal_terms_are_frame_invariant(d, phi, theta):
    scene, x = _goal_scene(d, phi, theta)
    dd, pp = goal_terms(x, scene)
    assert dd == pytest.approx(d, abs=1e-12)
    if d > 1e-6:
        assert pp == pytest.approx(abs(phi), abs=1e-6)


def test_dropped_target_uses_fixed_goal_cost(lone_circle_scene):
    x = lone_circle_scene.initial_state()
    gone = WorldState(x.robot, x.objects, (True,))
    assert goal_cost(gone, lone_circle_scene, CostWeights(dropped_target_cost=3.5)) == 3.5


def test_disturbance_examples(clutter_scene):
    x = clutter_scene.initial_state()
    assert disturbance_cost(x, x, clutter_scene) == 0.0
    p = x.objects[2]
    y = with_object(x, 2, Pose2(p.x + 0.1, p.y, p.theta))
    assert disturbance_cost(x, y, clutter_scene) == pytest.approx(0.01, rel=1e-9)
    t = x.objects[0]
    z = with_object(x, 0, Pose2(t.x + 0.1, t.y, t.theta))
    assert disturbance_cost(x, z, clutter_scene) == 0.0
    assert disturbance_cost(x, z, clutter_scene, CostWeights(include_target_disturbance=True)) == pytest.approx(0.01)


def test_disturbance_rotation_is_wrapped(clutter_scene):
    x = clutter_scene.initial_state()
    p = x.objects[1]
    y = with_object(x, 1, Pose2(p.x, p.y, p.theta + 2 * math.pi + 0.1))
    assert disturbance_cost(x, y, clutter_scene) == pytest.approx(W.w_ang * 0.01, rel=1e-6)


def _edge_scene():
    # Object 1 sits 0.02 m inside the table edge, outside the 0.05 m safe zone.
    return make_scene([circle(0.0, 0.0, 0.03, target=True), circle(0.2, 0.0, 0.03)],
                      robot_initial=RobotState(-0.25, 0.0, 0.0, 0.06), validate=False)


def test_edge_examples(clutter_scene):
    x = clutter_scene.initial_state()
    assert edge_cost(x, x, clutter_scene) == 0.0
    scene = _edge_scene()
    x = scene.initial_state()
    x = with_object(x, 1, Pose2(0.28, 0.0))
    assert edge_cost(x, x, scene) == 1.0
    y = with_object(x, 1, Pose2(0.281, 0.0))
    assert edge_cost(x, y, scene) == pytest.approx(math.e, rel=1e-9)


def test_edge_cost_clamps_and_charges_drops():
    scene = _edge_scene()
    x = with_object(scene.initial_state(), 1, Pose2(0.26, 0.0))
    y = with_object(x, 1, Pose2(0.29, 0.0))
    assert edge_cost(x, y, scene) == pytest.approx(math.exp(30), rel=1e-9)
    far = with_object(x, 1, Pose2(0.299, 0.2))
    assert edge_cost(x, far, scene) == pytest.approx(math.exp(50), rel=1e-12)
    gone = WorldState(y.robot, y.objects, (False, True))
    assert edge_cost(x, gone, scene) == math.exp(50)


@given(st.floats(0.0, 0.1), st.floats(0.0, 0.1))
def test_edge_cost_monotone_in_displacement(a, b):
    scene = _edge_scene()
    x = with_object(scene.initial_state(), 1, Pose2(0.26, 0.0))
    lo, hi = sorted((a, b))
    c_lo = edge_cost(x, with_object(x, 1, Pose2(0.26, 0.02 + lo)), scene)
    c_hi = edge_cost(x, with_object(x, 1, Pose2(0.26, 0.02 + hi)), scene)
    assert c_lo <= c_hi


def test_acceleration_examples():
    u = Control(0.04, 0.0, 0.0, 0.0)
    assert acceleration_cost(u, u) == 0.0
    assert acceleration_cost(Control(), u) == pytest.approx(0.0016, rel=1e-12)
    assert acceleration_cost(Control(0.01, 0.02), Control(0.02, 0.03)) == pytest.approx(0.0002, rel=1e-9)


def test_stationary_trajectory_is_pure_goal(lone_circle_scene):
    x = lone_circle_scene.initial_state()
    b = trajectory_cost([Control()] * 3, [x] * 4, lone_circle_scene)
    assert b.disturbance == b.edge == b.acceleration == 0.0
    assert b.total == W.w_g * goal_cost(x, lone_circle_scene)


def test_one_step_hand_oracle():
    scene = _edge_scene()
    x0 = with_object(scene.initial_state(), 1, Pose2(0.27, 0.0))
    u = Control(0.03, 0.04, 0.0, 0.0)
    x1 = with_object(x0, 1, Pose2(0.27, 0.001))
    x1 = WorldState(RobotState(x0.robot.theta_x + 0.03, 0.04, 0.0, 0.06), x1.objects, x1.dropped)
    # Terminal goal: target at origin, reference point at (-0.25 + 0.03 + 0.02, 0.04).
    vx, vy = 0.2, -0.04
    phi = math.atan2(abs(vy), vx)
    c_g = vx * vx + vy * vy + phi * phi
    c_d = 0.001**2
    c_e = math.e
    c_a = 0.03**2 + 0.04**2
    expected = 1e4 * c_g + 800 * c_d + 1 * c_e + 0.1 * c_a
    b = trajectory_cost([u], [x0, x1], scene)
    assert b.total == pytest.approx(expected, rel=1e-12)
    assert (b.goal, b.disturbance, b.edge, b.acceleration) == pytest.approx((c_g, c_d, c_e, c_a), rel=1e-12)


def test_length_mismatch_is_rejected(lone_circle_scene):
    x = lone_circle_scene.initial_state()
    with pytest.raises(ValueError):
        trajectory_cost([Control()], [x], lone_circle_scene)


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        CostWeights(w_d=-1.0)


controls = st.lists(
    st.builds(Control, st.floats(-0.06, 0.06), st.floats(-0.06, 0.06), st.floats(-0.5, 0.5), st.floats(-0.02, 0.02)),
    min_size=1,
    max_size=5,
)


@given(controls)
def test_total_matches_weighted_terms(us):
    scene = make_scene([circle(0.02, 0.04, target=True), box(-0.1, -0.09, 0.04, 0.03, 0.3)])
    states = rollout(scene.initial_state(), us, scene)
    b = trajectory_cost(us, states, scene)
    assert b.total == pytest.approx(recompute_total(b), rel=1e-12)
    assert min(b.goal, b.disturbance, b.edge, b.acceleration) >= 0.0


@given(controls)
def test_accumulator_prefixes_agree_with_batch(us):
    scene = make_scene([circle(0.02, 0.04, target=True), circle(-0.12, 0.1, 0.035)])
    states = rollout(scene.initial_state(), us, scene)
    acc = CostAccumulator(scene)
    for t, u in enumerate(us):
        prefix = acc.add(u, states[t], states[t + 1])
        assert prefix.total == pytest.approx(trajectory_cost(us[: t + 1], states[: t + 2], scene).total, rel=1e-12)


@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_running_terms_invariant_to_common_translation(dx, dy):
    scene = make_scene([circle(0.0, 0.0, target=True), circle(-0.1, 0.1, 0.03)])
    x = scene.initial_state()
    y = with_object(x, 1, Pose2(-0.09, 0.12, 0.3))

    def moved(s):
        return WorldState(s.robot, tuple(Pose2(p.x + dx, p.y + dy, p.theta) for p in s.objects), s.dropped)

    assert disturbance_cost(moved(x), moved(y), scene) == pytest.approx(disturbance_cost(x, y, scene), rel=1e-9)


def test_fall_is_charged_once():
    scene = _edge_scene()
    x = with_object(scene.initial_state(), 1, Pose2(0.26, 0.0))
    fell = WorldState(x.robot, with_object(x, 1, Pose2(0.31, 0.0)).objects, (False, True))
    assert edge_cost(x, fell, scene) == math.exp(50)
    assert edge_cost(fell, fell, scene) == 0.0
