import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mnplan.geometry import generate_scene, scene_class, segment_hits_obstacle, Workspace
from mnplan.robots import (RobotModel, forward_kinematics, interpolate, make_robot, nlink2d, path_feasible,
                           path_length, phi, point2d, point3d, rigid2d, steer_to)

from .conftest import make_scene

WS = Workspace([-20, -20], [20, 20])


def test_model_bounds():
    arm = nlink2d(WS, (3.0, 3.0))
    assert arm.dim == 4
    assert np.allclose(arm.lower[2:], -0.75 * math.pi) and np.allclose(arm.upper[2:], 0.75 * math.pi)
    assert np.allclose(arm.lower[:2], -20)
    r = rigid2d(WS)
    assert r.dim == 3 and r.upper[2] == pytest.approx(math.pi)
    assert nlink2d(WS, (2.5, 2.5, 2.5)).dim == 5
    assert point3d(Workspace([-1, -1, -1], [1, 1, 1])).dim == 3
    with pytest.raises(ValueError):
        RobotModel("hexapod", [0], [1])


def test_make_robot_specs():
    assert make_robot({"kind": "nlink2d", "links": 3}, WS).link_lengths == (2.5, 2.5, 2.5)
    assert make_robot({"kind": "rigid2d", "half_extents": [1, 2]}, WS).half_extents == (1.0, 2.0)
    with pytest.raises(ValueError):
        make_robot({"kind": "blimp"}, WS)


def test_phi_examples(empty2d, unit_box_scene):
    m = point2d(WS)
    assert not phi(m, [0, 0], empty2d)
    assert phi(m, [0, 0], unit_box_scene)
    with pytest.raises(ValueError):
        phi(m, [0, 0, 0], empty2d)


def test_phi_out_of_bounds(empty2d):
    assert phi(point2d(WS), [21, 0], empty2d)
    assert phi(nlink2d(WS), [0, 0, 0, 2.9], empty2d)


def test_phi_two_link_arm_hand_checked():
    scene = make_scene([((4.0, 0.0), (1.0, 1.0))])
    arm = nlink2d(WS, (3.0, 3.0))
    assert phi(arm, [0, 0, 0, 0], scene)
    assert not phi(arm, [0, 0, math.pi / 2, 0], scene)


def test_rigid_body_phi():
    scene = make_scene([((0.0, 0.0), (1.0, 1.0))])
    m = rigid2d(WS)
    assert phi(m, [0, 0, 0], scene)
    assert not phi(m, [5, 5, 0.3], scene)
    assert phi(m, [19.5, 0, 0], scene)  # sticks out of the workspace


def test_forward_kinematics_straight_chain():
    arm = nlink2d(WS, (2.5, 2.5, 2.5))
    j = forward_kinematics(arm, [1.0, -2.0, 0, 0, 0])
    assert np.allclose(j[:, 1], -2.0, atol=1e-12)
    assert j[-1, 0] - j[0, 0] == pytest.approx(7.5, abs=1e-12)
    with pytest.raises(ValueError):
        forward_kinematics(point2d(WS), [0, 0])


def test_steer_examples(empty2d, unit_box_scene):
    m = point2d(WS)
    assert steer_to(m, [3, 3], [3, 3], empty2d)
    assert not steer_to(m, [-5, 0], [5, 0], unit_box_scene)
    assert steer_to(m, [-5, 3], [5, 3], unit_box_scene)


def test_interpolation_count():
    m = point2d(WS)
    pts = interpolate(m, [0, 0], [1, 0])  # normalized distance 0.05 -> 5 steps
    assert len(pts) == 6
    assert np.array_equal(pts[-1], [1, 0]) and np.array_equal(pts[0], [0, 0])
    assert len(interpolate(m, [2, 2], [2, 2])) == 1


def test_steer_matches_exact_segment_test():
    # sampled steering can only miss thin corner clips, which a finer
    # resolution then catches
    rng = np.random.default_rng(0)
    m = point2d(WS)
    fine = point2d(WS, delta_steer=m.delta_steer / 50)
    misses = 0
    for trial in range(1000):
        if trial % 100 == 0:
            scene = generate_scene(scene_class("simple2d", cloud_points=1), trial)
        a, b = rng.uniform(-20, 20, (2, 2))
        exact = segment_hits_obstacle(a, b, scene)
        sampled = not steer_to(m, a, b, scene)
        if sampled:
            assert exact
        elif exact:
            misses += 1
            assert not steer_to(fine, a, b, scene)
    assert misses <= 10


cfg = st.tuples(st.floats(-20, 20), st.floats(-20, 20), st.floats(-math.pi, math.pi))


@given(cfg, cfg)
def test_steer_symmetric_rigid(a, b):
    scene = make_scene([((0.0, 0.0), (3.0, 3.0)), ((10.0, 10.0), (2.0, 5.0))], cloud=0)
    m = rigid2d(WS)
    assert steer_to(m, a, b, scene) == steer_to(m, b, a, scene)


@given(st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), min_size=1, max_size=6))
def test_feasible_prefixes(points):
    scene = make_scene([((0.0, 0.0), (3.0, 3.0))], cloud=0)
    m = point2d(WS)
    if path_feasible(m, points, scene):
        for k in range(1, len(points) + 1):
            assert path_feasible(m, points[:k], scene)


def test_path_feasible_examples(unit_box_scene):
    m = point2d(WS)
    assert path_feasible(m, [[5, 5]], unit_box_scene)
    assert not path_feasible(m, [[-5, 0], [5, 0]], unit_box_scene)
    with pytest.raises(ValueError):
        path_feasible(m, np.zeros((0, 2)), unit_box_scene)


def test_path_length_examples():
    unit = RobotModel("point2d", [-1, -1], [1, 1])  # normalization is the identity
    assert path_length(unit, [[0, 0]]) == 0
    assert path_length(unit, [[0, 0], [3, 4]]) == pytest.approx(5)
    p = [[0, 0], [0.3, 0.1], [-0.5, 0.9]]
    assert path_length(unit, p) == pytest.approx(path_length(unit, p[::-1]))
    # raw-unit workspace models measure in normalized units
    assert path_length(point2d(WS), [[0, 0], [3, 4]]) == pytest.approx(5 * 2 / 40)


def test_normalize_examples():
    arm = nlink2d(WS, (2.5, 2.5, 2.5))
    assert np.allclose(arm.normalize(arm.lower), -1)
    assert np.allclose(arm.normalize(0.5 * (arm.lower + arm.upper)), 0)
    rng = np.random.default_rng(0)
    c = arm.sample_uniform(rng, 100)
    assert np.max(np.abs(arm.denormalize(arm.normalize(c)) - c)) < 1e-12


def test_collision_mask_matches_phi():
    scene = generate_scene(scene_class("simple2d", cloud_points=1), 2)
    rng = np.random.default_rng(1)
    for m in (point2d(WS), rigid2d(WS), nlink2d(WS)):
        cs = rng.uniform(m.lower - 1, m.upper + 1, (200, m.dim))
        assert np.array_equal(m.collision_mask(cs, scene), [phi(m, c, scene) for c in cs])
