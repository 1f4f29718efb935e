import math

import pytest
from hypothesis import HealthCheck, settings

from clutter_mpc.world import Box, Circle, ObjectSpec, Pose2, RobotState, Table, make_scene

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


def circle(x, y, r=0.04, target=False, friction=0.4, theta=0.0):
    return ObjectSpec(Circle(r), 0.5, friction, Pose2(x, y, theta), is_target=target)


def box(x, y, hx=0.04, hy=0.03, theta=0.0, target=False, friction=0.4):
    return ObjectSpec(Box(hx, hy), 0.5, friction, Pose2(x, y, theta), is_target=target)


@pytest.fixture
def lone_circle_scene():
    """A single target circle straight ahead of the gripper, palm face 0.2 m short of it."""
    robot = RobotState(-0.22, 0.0, 0.0, 0.06)
    return make_scene([circle(0.0, 0.0, 0.035, target=True)], robot_initial=robot)


@pytest.fixture
def clutter_scene():
    objs = [
        circle(0.02, 0.04, 0.04, target=True),
        box(-0.1, -0.09, 0.04, 0.03, 0.3),
        circle(0.12, -0.1, 0.035),
        box(0.15, 0.15, 0.03, 0.05, -0.7),
        circle(-0.05, 0.2, 0.038),
    ]
    return make_scene(objs)


@pytest.fixture
def wide_table_scene():
    """One object far from every edge on a large table, for distribution checks."""
    return make_scene([circle(0.0, 0.0, 0.5, target=True)], table=Table(5.0, 5.0, 0.05),
                      robot_initial=RobotState(-4.0, 0.0, 0.0, 0.06))


def angle_close(a, b, tol=1e-9):
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
