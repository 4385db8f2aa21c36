"""Compiled and numpy kernels must agree; the fallback must be selectable."""
import os
import subprocess
import sys

import numpy as np
import pytest

from mnplan import _kernels, _pykernels
from mnplan.geometry import generate_scene, scene_class
from mnplan.robots import nlink2d, point2d, point3d, rigid2d

BACKENDS = _kernels.backends()
needs_c = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def _scene(dim, seed):
    return generate_scene(scene_class("simple2d" if dim == 2 else "complex3d", cloud_points=1), seed)


@needs_c
@pytest.mark.parametrize("dim", [2, 3])
def test_points_agree(dim):
    c = BACKENDS["cython"]
    rng = np.random.default_rng(dim)
    for seed in range(20):
        s = _scene(dim, seed)
        pts = rng.uniform(-21, 21, (300, dim))
        args = (s.box_lo, s.box_hi, s.workspace.lo, s.workspace.hi)
        m_py = _pykernels.points_collide_mask(pts, *args)
        assert np.array_equal(m_py, c.points_collide_mask(pts, *args))
        assert _pykernels.points_collide(pts[:3], *args) == c.points_collide(pts[:3], *args)


@needs_c
def test_segments_agree_including_boundary_cases():
    c = BACKENDS["cython"]
    rng = np.random.default_rng(0)
    s = _scene(2, 3)
    args = (s.box_lo, s.box_hi, s.workspace.lo, s.workspace.hi)
    for _ in range(2000):
        a, b = rng.uniform(-20, 20, (2, 2))
        if rng.random() < 0.3:  # axis-parallel segments along box faces
            k = rng.integers(len(s.box_lo))
            a[1] = b[1] = s.box_hi[k, 1]
        assert _pykernels.segment_collides(a, b, *args) == c.segment_collides(a, b, *args)


@needs_c
@pytest.mark.parametrize("factory", [point2d, point3d, rigid2d, nlink2d,
                                     lambda ws: nlink2d(ws, (2.5, 2.5, 2.5))])
def test_steer_agrees(factory):
    c = BACKENDS["cython"]
    rng = np.random.default_rng(5)
    dim = 3 if factory is point3d else 2
    s = _scene(dim, 1)
    m = factory(s.workspace)
    for _ in range(500):
        a = m.sample_uniform(rng)
        b = m.clamp(a + rng.normal(size=m.dim) * 0.2 * (m.upper - m.lower))
        if rng.random() < 0.1:
            b = a.copy()
        args = (m._code, a, b, m.lower, m.upper, m._scale, m.delta_steer, m._geom,
                s.box_lo, s.box_hi, s.workspace.lo, s.workspace.hi)
        assert _pykernels.steer_collides(*args) == c.steer_collides(*args)


@needs_c
def test_chain_and_rect_agree():
    c = BACKENDS["cython"]
    rng = np.random.default_rng(7)
    s = _scene(2, 2)
    args = (s.box_lo, s.box_hi, s.workspace.lo, s.workspace.hi)
    for _ in range(500):
        chain = np.concatenate([rng.uniform(-15, 15, 2), rng.uniform(-2.3, 2.3, 3)])[None, :]
        links = np.array([2.5, 2.5, 2.5])
        assert _pykernels.chains_collide(chain, links, *args) == c.chains_collide(chain, links, *args)
        pose = np.array([[*rng.uniform(-18, 18, 2), rng.uniform(-3, 3)]])
        assert _pykernels.rects_collide(pose, (1.5, 0.75), *args) == c.rects_collide(pose, (1.5, 0.75), *args)


@needs_c
def test_nearest_and_radius_agree_with_ties():
    c = BACKENDS["cython"]
    rng = np.random.default_rng(3)
    nodes = np.ascontiguousarray(rng.integers(-3, 4, (400, 2)).astype(float) / 3)
    for _ in range(200):
        q = rng.integers(-3, 4, 2).astype(float) / 3
        n = int(rng.integers(1, 401))
        assert _pykernels.nearest(nodes, n, q) == c.nearest(nodes, n, q)
        assert np.array_equal(_pykernels.within_radius(nodes, n, q, 0.5), c.within_radius(nodes, n, q, 0.5))


def test_nearest_ties_lowest_index():
    nodes = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    for mod in BACKENDS.values():
        assert mod.nearest(nodes, 3, np.zeros(2)) == 0


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, MNPLAN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import mnplan; print(mnplan.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
