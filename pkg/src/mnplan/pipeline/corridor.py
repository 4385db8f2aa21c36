"""Two-way corridor benchmark and the analytic two-solution dataset.

The corridor scene has a square block in the middle of the workspace and a
thin plate running through it that sticks out on both sides. A point robot
starting below the block and heading to a goal above it must pass either
plate end; those two routes cost the same, so expert data is bimodal and
the average of the two first waypoints falls inside the block.
"""
from __future__ import annotations

import numpy as np

from ..classical import PlannerBudget, path_simplify, rrt_star
from ..geometry import BoxObstacle, Scene, Workspace, sample_cloud
from ..nets import Dataset
from ..robots import point2d

BLOCK = BoxObstacle([0.0, 0.0], [5.0, 5.0])
PLATE = BoxObstacle([0.0, -0.75], [9.0, 0.25])
EVAL_START = np.array([0.0, -14.0])
EVAL_GOAL = np.array([0.0, 14.0])


def corridor_scene(cloud_points: int = 300, seed: int = 0) -> Scene:
    ws = Workspace([-20.0, -20.0], [20.0, 20.0])
    bare = Scene(ws, (BLOCK, PLATE), None, seed)
    return bare.with_cloud(sample_cloud(bare, cloud_points, seed))


def side_fractions(points) -> tuple[float, float]:
    """Fraction of points strictly left / right of the central block."""
    x = np.asarray(points, dtype=np.float64)[:, 0]
    return float(np.mean(x < BLOCK.lo[0])), float(np.mean(x > BLOCK.hi[0]))


def corridor_problems(n: int, seed: int):
    """``n`` start/goal pairs on the symmetry axis, below and above the block."""
    rng = np.random.default_rng(seed)
    ys = rng.uniform(-17.0, -12.0, n)
    yg = rng.uniform(12.0, 17.0, n)
    return [(np.array([0.0, a]), np.array([0.0, b])) for a, b in zip(ys, yg)]


def corridor_dataset(scene: Scene, n_paths: int = 200, iterations: int = 1500, seed: int = 0):
    """Expert (RRT*) data on the corridor scene. Returns ``(dataset, paths)``."""
    model = point2d(scene.workspace)
    budget = PlannerBudget(max_iterations=iterations, max_time=1e9)
    ct, cg, cn, paths = [], [], [], []
    for i, (s, g) in enumerate(corridor_problems(n_paths, seed)):
        res = rrt_star(model, scene, s, g, budget, np.random.default_rng([seed, i]))
        if res.path is None:
            continue
        p = path_simplify(model, res.path, scene)
        paths.append(p)
        for k in range(len(p) - 1):
            ct.append(p[k])
            cg.append(p[-1])
            cn.append(p[k + 1])
    n = len(ct)
    return Dataset([scene], np.zeros(n, dtype=np.intp), ct, cg, cn, ["corridor.json"]), paths


def two_mode_scene(cloud_points: int = 200, seed: int = 0) -> Scene:
    ws = Workspace([-20.0, -20.0], [20.0, 20.0])
    bare = Scene(ws, (BoxObstacle([0.0, 0.0], [4.0, 4.0]),), None, seed)
    return bare.with_cloud(sample_cloud(bare, cloud_points, seed))


TWO_MODE_START = np.array([0.0, -12.0])
TWO_MODE_GOAL = np.array([0.0, 12.0])
TWO_MODE_TARGETS = (np.array([-6.0, -2.0]), np.array([6.0, -2.0]))


def two_mode_dataset(scene: Scene, n: int = 400, jitter: float = 0.25, seed: int = 0) -> Dataset:
    """Same (jittered) decision input, two mirrored next configurations.

    Half the samples go to each target, so the squared-error optimum at the
    decision point is their midpoint ``(0, -2)``, inside the obstacle.
    """
    rng = np.random.default_rng(seed)
    c_t = TWO_MODE_START + rng.uniform(-jitter, jitter, (n, 2))
    c_goal = TWO_MODE_GOAL + rng.uniform(-jitter, jitter, (n, 2))
    side = np.arange(n) % 2
    c_next = np.where(side[:, None] == 0, TWO_MODE_TARGETS[0], TWO_MODE_TARGETS[1])
    c_next = c_next + rng.uniform(-jitter, jitter, (n, 2))
    return Dataset([scene], np.zeros(n, dtype=np.intp), c_t, c_goal, c_next, ["two_mode.json"])
