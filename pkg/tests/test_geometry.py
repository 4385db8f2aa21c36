import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mnplan import geometry as g
from mnplan.geometry import (BoxObstacle, Scene, SceneGenerationError, Workspace, dump_scene, generate_scene,
                             load_scene, point_in_obstacle, rect_hits_obstacle, sample_cloud, scene_class,
                             segment_hits_obstacle)

from .conftest import make_scene

coord = st.floats(-19.5, 19.5, allow_nan=False)


def test_workspace_validation():
    with pytest.raises(ValueError):
        Workspace([0, 0], [0, 1])
    with pytest.raises(ValueError):
        Workspace([0], [1])
    assert Workspace([-1, -1, -1], [1, 1, 1]).dim == 3


def test_obstacle_validation():
    with pytest.raises(ValueError):
        BoxObstacle([0, 0], [1, 0])
    ws = Workspace([-2, -2], [2, 2])
    with pytest.raises(ValueError):
        Scene(ws, (BoxObstacle([1.5, 0], [1, 1]),), None, 0)
    with pytest.raises(ValueError):
        Scene(ws, (BoxObstacle([0, 0, 0], [1, 1, 1]),), None, 0)


def test_generate_scene_simple2d_seed7():
    a = generate_scene("simple2d", 7)
    b = generate_scene("simple2d", 7)
    assert len(a.obstacles) == 7
    assert np.all(a.workspace.lo == -20) and np.all(a.workspace.hi == 20)
    for ob in a.obstacles:
        assert np.allclose(ob.half_extents, 2.5)
    assert dump_scene(a) == dump_scene(b)
    assert len(a.cloud) == 1400


def test_generate_scene_seeds_differ():
    a = generate_scene("simple2d", 7)
    b = generate_scene("simple2d", 8)
    assert not np.allclose(a.box_lo, b.box_lo)


def test_generate_scene_complex3d():
    s = generate_scene("complex3d", 1)
    assert s.dim == 3 and len(s.obstacles) == 10 and len(s.cloud) == 1000
    assert s.cloud_on_boundary()


def test_unknown_class():
    with pytest.raises(ValueError):
        generate_scene("maze", 0)


def test_rejection_sampling_failure():
    cls = scene_class("simple2d", n_obstacles=50, min_separation=30.0, max_attempts=200)
    with pytest.raises(SceneGenerationError):
        generate_scene(cls, 0)


def test_cloud_on_unit_square():
    scene = make_scene([((0.0, 0.0), (0.5, 0.5))], cloud=0)
    pts = sample_cloud(scene, 4, 0)
    assert pts.shape == (4, 2)
    on_edge = np.isclose(np.max(np.abs(pts), axis=1), 0.5, atol=1e-12)
    assert on_edge.all()


def test_cloud_allocation_by_perimeter():
    # perimeters 4 and 12
    scene = make_scene([((-10.0, 0.0), (0.5, 0.5)), ((10.0, 0.0), (1.5, 1.5))], cloud=0)
    pts = sample_cloud(scene, 1600, 3)
    n_small = int(np.sum(pts[:, 0] < 0))
    sd = math.sqrt(1600 * 0.25 * 0.75)
    assert abs(n_small - 400) <= 3 * sd


def test_cloud_needs_obstacles():
    with pytest.raises(ValueError):
        sample_cloud(g.empty_scene(2), 5, 0)
    with pytest.raises(ValueError):
        sample_cloud(make_scene([((0.0, 0.0), (1.0, 1.0))], cloud=0), 0, 0)


def test_point_in_obstacle_examples(unit_box_scene):
    assert point_in_obstacle([0, 0], unit_box_scene)
    assert not point_in_obstacle([2, 0], unit_box_scene)
    assert point_in_obstacle([1, 0], unit_box_scene)
    assert point_in_obstacle([25, 0], unit_box_scene)


def test_segment_examples(unit_box_scene):
    assert segment_hits_obstacle([-2, 0], [2, 0], unit_box_scene)
    assert not segment_hits_obstacle([-2, 2], [2, 2], unit_box_scene)
    assert segment_hits_obstacle([-2, 1], [2, 1], unit_box_scene)


def test_rect_examples():
    far = make_scene([((5.0, 5.0), (0.5, 0.5))])
    assert not rect_hits_obstacle([0, 0], [1.0, 0.5], 0.0, far)
    centered = make_scene([((0.0, 0.0), (0.5, 0.5))])
    assert rect_hits_obstacle([0, 0], [1.0, 0.5], 0.0, centered)


def _mc_overlap(center, half, angle, box_lo, box_hi, rng, n=10_000):
    u = rng.uniform(-1, 1, (n, 2)) * half
    c, s = math.cos(angle), math.sin(angle)
    pts = np.asarray(center) + u @ np.array([[c, s], [-s, c]])
    inside = np.all((pts >= box_lo) & (pts <= box_hi), axis=1)
    return inside.mean()


def test_rect_rotated_vs_monte_carlo():
    scene = make_scene([((0.0, 0.0), (1.0, 1.0))])
    rng = np.random.default_rng(0)
    frac = _mc_overlap([2.2, 0.0], [1.0, 0.5], math.pi / 4, scene.box_lo[0], scene.box_hi[0], rng)
    assert rect_hits_obstacle([2.2, 0.0], [1.0, 0.5], math.pi / 4, scene) == (frac > 0)


def test_rect_sat_agrees_with_monte_carlo_oracle():
    rng = np.random.default_rng(1)
    scene = make_scene([((0.0, 0.0), (1.0, 1.0))], bound=50.0)
    for _ in range(1000):
        center = rng.uniform(-4, 4, 2)
        half = rng.uniform(0.2, 2.0, 2)
        angle = rng.uniform(-math.pi, math.pi)
        frac = _mc_overlap(center, half, angle, scene.box_lo[0], scene.box_hi[0], rng, n=2000)
        hit = rect_hits_obstacle(center, half, angle, scene)
        if frac > 1e-3:
            assert hit
        if not hit:
            assert frac == 0.0


@given(coord, coord)
def test_degenerate_segment_is_point_check(x, y):
    scene = make_scene([((0.0, 0.0), (3.0, 3.0)), ((8.0, -5.0), (2.0, 4.0))], cloud=0)
    assert segment_hits_obstacle([x, y], [x, y], scene) == point_in_obstacle([x, y], scene)


@given(coord, coord, coord, coord)
def test_segment_symmetric(a0, a1, b0, b1):
    scene = make_scene([((0.0, 0.0), (3.0, 3.0)), ((8.0, -5.0), (2.0, 4.0))], cloud=0)
    assert segment_hits_obstacle([a0, a1], [b0, b1], scene) == segment_hits_obstacle([b0, b1], [a0, a1], scene)


def test_slab_test_covers_sampled_oracle():
    rng = np.random.default_rng(2)
    for trial in range(1000):
        scene = generate_scene(scene_class("simple2d", cloud_points=1), trial)
        a, b = rng.uniform(-20, 20, (2, 2))
        t = np.linspace(0, 1, 1001)[:, None]
        pts = a + t * (b - a)
        oracle = bool(np.any(np.all((pts[:, None, :] >= scene.box_lo) & (pts[:, None, :] <= scene.box_hi), axis=2)))
        if oracle:
            assert segment_hits_obstacle(a, b, scene)


def test_scene_json_roundtrip_bytes():
    s = generate_scene(scene_class("complex3d", cloud_points=30), 11)
    text = dump_scene(s)
    again = load_scene(text)
    assert dump_scene(again) == text
    assert np.array_equal(again.cloud, s.cloud)
    assert text.startswith('{"version": 1, "dim": 3, "lo": ')


def test_scene_file_roundtrip(tmp_path):
    s = generate_scene(scene_class("simple2d", cloud_points=20), 4)
    path = tmp_path / "s.json"
    g.save_scene(s, path)
    assert dump_scene(g.read_scene(path)) == path.read_text()


def test_load_scene_rejects_bad_version():
    s = dump_scene(generate_scene(scene_class("simple2d", cloud_points=5), 0))
    with pytest.raises(ValueError):
        load_scene(s.replace('"version": 1', '"version": 2'))
