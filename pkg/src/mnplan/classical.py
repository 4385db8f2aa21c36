"""RRT, RRT* and Informed-RRT*, plus greedy path simplification.

Trees live in normalized coordinates (see :mod:`mnplan.robots`); returned
paths are raw configurations.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .robots import RobotModel, phi, steer_to


# rewiring must beat the current cost by more than rounding noise
REWIRE_EPS = 1e-12


@dataclass(frozen=True)
class PlannerBudget:
    max_iterations: int = 20_000
    max_time: float = 60.0
    goal_bias: float = 0.05
    eta: float = 0.1
    gamma: float = 2.0
    stop_at_cost: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1 or self.max_time <= 0 or self.eta <= 0 or self.gamma <= 0:
            raise ValueError("planner budget values must be positive")
        if not 0.0 < self.goal_bias < 1.0:
            raise ValueError("goal_bias must lie in (0, 1)")


@dataclass
class PlannerResult:
    """Outcome of a classical planner run. ``path`` is None on failure."""

    path: np.ndarray | None
    cost: float = math.inf
    iterations: int = 0
    elapsed: float = 0.0
    cost_trace: list = field(default_factory=list)
    first_solution_iteration: int | None = None
    informed_samples: np.ndarray | None = None
    informed_costs: np.ndarray | None = None
    tree: "Tree | None" = None

    @property
    def success(self) -> bool:
        return self.path is not None


class Tree:
    """Array-backed search tree with cost-to-come bookkeeping.

    ``parent[0] == 0`` marks the root. Rewiring propagates cost changes to
    every descendant so ``cost[i] == cost[parent[i]] + |x_i - x_parent|``
    holds after each mutation.
    """

    def __init__(self, root, capacity: int = 1024):
        root = np.asarray(root, dtype=np.float64)
        self.dim = root.size
        self.nodes = np.zeros((max(capacity, 2), self.dim))
        self.parent = np.zeros(max(capacity, 2), dtype=np.intp)
        self.cost = np.zeros(max(capacity, 2))
        self.children: list[list[int]] = [[]]
        self.nodes[0] = root
        self.size = 1

    def _grow(self):
        cap = 2 * self.nodes.shape[0]
        self.nodes = np.concatenate([self.nodes, np.zeros_like(self.nodes)])[:cap]
        self.parent = np.concatenate([self.parent, np.zeros_like(self.parent)])[:cap]
        self.cost = np.concatenate([self.cost, np.zeros_like(self.cost)])[:cap]

    def add(self, x, parent: int, cost: float) -> int:
        if self.size == self.nodes.shape[0]:
            self._grow()
        i = self.size
        self.nodes[i] = x
        self.parent[i] = parent
        self.cost[i] = cost
        self.children.append([])
        self.children[parent].append(i)
        self.size += 1
        return i

    def rewire(self, i: int, new_parent: int, new_cost: float) -> None:
        j = new_parent
        while j != 0:
            if j == i:
                raise ValueError(f"rewiring node {i} under its own descendant {new_parent}")
            j = self.parent[j]
        if i == 0:
            raise ValueError("the root cannot be rewired")
        old = self.parent[i]
        self.children[old].remove(i)
        self.children[new_parent].append(i)
        self.parent[i] = new_parent
        delta = new_cost - self.cost[i]
        self.cost[i] = new_cost
        stack = list(self.children[i])
        while stack:
            j = stack.pop()
            self.cost[j] += delta
            stack.extend(self.children[j])

    def nearest(self, q) -> int:
        return _kernels.nearest(self.nodes, self.size, q)

    def near(self, q, r: float) -> np.ndarray:
        return _kernels.within_radius(self.nodes, self.size, q, r)

    def branch(self, i: int) -> list[int]:
        out = [i]
        while i != 0:
            i = int(self.parent[i])
            out.append(i)
        return out[::-1]

    def check_invariants(self, tol: float = 1e-9) -> None:
        if self.parent[0] != 0 or self.cost[0] != 0.0:
            raise AssertionError("root must be its own parent with zero cost")
        for i in range(1, self.size):
            p = self.parent[i]
            if not 0 <= p < self.size or p == i:
                raise AssertionError(f"node {i} has invalid parent {p}")
            expect = self.cost[p] + float(np.linalg.norm(self.nodes[i] - self.nodes[p]))
            if abs(self.cost[i] - expect) > tol * max(1.0, expect):
                raise AssertionError(f"cost recurrence broken at node {i}: {self.cost[i]} != {expect}")
        # every node must reach the root (no cycles)
        for i in range(self.size):
            seen = 0
            j = i
            while j != 0:
                j = self.parent[j]
                seen += 1
                if seen > self.size:
                    raise AssertionError(f"cycle through node {i}")


def _check_endpoints(model, scene, c_init, c_goal):
    if phi(model, c_init, scene):
        raise ValueError("c_init is in collision")
    if phi(model, c_goal, scene):
        raise ValueError("c_goal is in collision")


def _steer(x_from, x_to, eta):
    d = x_to - x_from
    n = math.sqrt(d @ d)
    if n <= eta:
        return x_to.copy()
    return x_from + d * (eta / n)


def rrt(model: RobotModel, scene, c_init, c_goal, budget: PlannerBudget, rng) -> PlannerResult:
    """Plain RRT with goal biasing; stops at the first connection to the goal."""
    c_init = np.asarray(c_init, dtype=np.float64)
    c_goal = np.asarray(c_goal, dtype=np.float64)
    _check_endpoints(model, scene, c_init, c_goal)
    start = time.perf_counter()
    g = model.normalize(c_goal)
    tree = Tree(model.normalize(c_init), capacity=min(budget.max_iterations + 2, 4096))
    raw = [c_init]
    d = model.dim
    for it in range(1, budget.max_iterations + 1):
        if time.perf_counter() - start > budget.max_time:
            it -= 1
            break
        x_rand = g if rng.random() < budget.goal_bias else rng.uniform(-1.0, 1.0, d)
        i_near = tree.nearest(x_rand)
        x_new = _steer(tree.nodes[i_near], x_rand, budget.eta)
        c_new = model.denormalize(x_new)
        if not steer_to(model, raw[i_near], c_new, scene):
            continue
        i_new = tree.add(x_new, i_near, tree.cost[i_near] + float(np.linalg.norm(x_new - tree.nodes[i_near])))
        raw.append(c_new)
        if steer_to(model, c_new, c_goal, scene):
            idx = tree.branch(i_new)
            path = np.array([raw[i] for i in idx] + [c_goal])
            cost = tree.cost[i_new] + float(np.linalg.norm(g - x_new))
            return PlannerResult(path, cost, it, time.perf_counter() - start, [cost], it, tree=tree)
    return PlannerResult(None, math.inf, it, time.perf_counter() - start, tree=tree)


def sample_informed(rng, x_start, x_goal, c_best: float, n: int = 1) -> np.ndarray:
    """Uniform samples from the prolate hyperspheroid with foci ``x_start``,
    ``x_goal`` and transverse diameter ``c_best`` (unit-ball transform)."""
    x_start = np.asarray(x_start, dtype=np.float64)
    x_goal = np.asarray(x_goal, dtype=np.float64)
    d = x_start.size
    c_min = float(np.linalg.norm(x_goal - x_start))
    center = 0.5 * (x_start + x_goal)
    rot = _rotation_to_world(x_start, x_goal)
    r1 = 0.5 * c_best
    r_rest = 0.5 * math.sqrt(max(c_best * c_best - c_min * c_min, 0.0))
    radii = np.full(d, r_rest)
    radii[0] = r1
    ball = _unit_ball(rng, n, d)
    return center + (ball * radii) @ rot.T


def _unit_ball(rng, n, d):
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / d)
    return z * r[:, None]


def _rotation_to_world(x_start, x_goal):
    d = x_start.size
    c_min = float(np.linalg.norm(x_goal - x_start))
    if c_min == 0.0:
        return np.eye(d)
    a1 = (x_goal - x_start) / c_min
    M = np.outer(a1, np.eye(d)[0])
    U, _, Vt = np.linalg.svd(M)
    diag = np.ones(d)
    diag[-1] = np.linalg.det(U) * np.linalg.det(Vt.T)
    return U @ np.diag(diag) @ Vt


def _rrt_star(model, scene, c_init, c_goal, budget, rng, informed, debug=False, record_samples=False):
    c_init = np.asarray(c_init, dtype=np.float64)
    c_goal = np.asarray(c_goal, dtype=np.float64)
    _check_endpoints(model, scene, c_init, c_goal)
    start = time.perf_counter()
    d = model.dim
    x_init = model.normalize(c_init)
    g = model.normalize(c_goal)
    tree = Tree(x_init, capacity=min(budget.max_iterations + 2, 4096))
    raw = [c_init]
    goal_links: list[int] = []
    best_cost = math.inf
    best_link = -1
    trace = []
    first = None
    samples = [] if record_samples else None
    sample_costs = []
    it = 0
    for it in range(1, budget.max_iterations + 1):
        if time.perf_counter() - start > budget.max_time:
            it -= 1
            break
        if rng.random() < budget.goal_bias:
            x_rand = g
        elif informed and best_cost < math.inf:
            while True:
                x_rand = sample_informed(rng, x_init, g, best_cost)[0]
                if np.all(np.abs(x_rand) <= 1.0):
                    break
            if samples is not None:
                samples.append(x_rand)
                sample_costs.append(best_cost)
        else:
            x_rand = rng.uniform(-1.0, 1.0, d)
        i_near = tree.nearest(x_rand)
        x_new = _steer(tree.nodes[i_near], x_rand, budget.eta)
        c_new = model.denormalize(x_new)
        # a zero-length extension would duplicate a node and invite rewiring cycles
        fresh = np.any(x_new != tree.nodes[i_near])
        if fresh and steer_to(model, raw[i_near], c_new, scene):
            n = tree.size
            radius = min(budget.gamma * (math.log(n) / n) ** (1.0 / d), budget.eta) if n > 1 else budget.eta
            near = tree.near(x_new, radius)
            if i_near not in near:
                near = np.append(near, i_near)
            dists = np.linalg.norm(tree.nodes[near] - x_new, axis=1)
            cand = tree.cost[near] + dists
            # cheapest feasible parent; stable order resolves ties by index
            order = np.lexsort((near, cand))
            parent, parent_cost = i_near, tree.cost[i_near] + float(np.linalg.norm(x_new - tree.nodes[i_near]))
            for k in order:
                j = int(near[k])
                if j == i_near or steer_to(model, raw[j], c_new, scene):
                    parent, parent_cost = j, float(cand[k])
                    break
            i_new = tree.add(x_new, parent, parent_cost)
            raw.append(c_new)
            for k in range(len(near)):
                j = int(near[k])
                if j == parent:
                    continue
                new_cost = parent_cost + float(dists[k])
                if new_cost < tree.cost[j] - REWIRE_EPS and steer_to(model, c_new, raw[j], scene):
                    tree.rewire(j, i_new, new_cost)
            if debug:
                tree.check_invariants()
            if steer_to(model, c_new, c_goal, scene):
                goal_links.append(i_new)
        if goal_links:
            links = np.array(goal_links)
            totals = tree.cost[links] + np.linalg.norm(tree.nodes[links] - g, axis=1)
            k = int(np.argmin(totals))
            if totals[k] < best_cost:
                best_cost = float(totals[k])
                best_link = int(links[k])
            if first is None:
                first = it
        trace.append(best_cost)
        if budget.stop_at_cost is not None and best_cost <= budget.stop_at_cost:
            break
    elapsed = time.perf_counter() - start
    path = None
    if best_link >= 0:
        path = np.array([raw[i] for i in tree.branch(best_link)] + [c_goal])
        if budget.stop_at_cost is not None and best_cost > budget.stop_at_cost:
            path = None
    smp = costs = None
    if samples is not None:
        smp = np.array(samples).reshape(-1, d)
        costs = np.array(sample_costs)
    return PlannerResult(path, best_cost if path is not None else math.inf, it, elapsed, trace, first, smp, costs,
                         tree)


def rrt_star(model, scene, c_init, c_goal, budget: PlannerBudget, rng, debug: bool = False) -> PlannerResult:
    """RRT* with choose-parent and rewiring inside
    ``min(gamma * (log n / n) ** (1/d), eta)``.

    With ``budget.stop_at_cost`` set, the run ends as soon as the best cost
    drops to the target and fails if the budget expires first.
    """
    return _rrt_star(model, scene, c_init, c_goal, budget, rng, informed=False, debug=debug)


def informed_rrt_star(model, scene, c_init, c_goal, budget: PlannerBudget, rng,
                      debug: bool = False, record_samples: bool = False) -> PlannerResult:
    """RRT* that, once a solution of cost ``c_best`` exists, draws samples
    uniformly from the informed set ``{x : |x - x_init| + |x - x_goal| <= c_best}``."""
    return _rrt_star(model, scene, c_init, c_goal, budget, rng, informed=True,
                     debug=debug, record_samples=record_samples)


def path_simplify(model: RobotModel, path, scene) -> np.ndarray:
    """Drop colliding waypoints, then greedily shortcut from each anchor to the
    farthest waypoint it can steer to. Endpoints are always kept."""
    path = np.atleast_2d(np.asarray(path, dtype=np.float64))
    if len(path) == 0:
        raise ValueError("path must contain at least one waypoint")
    if len(path) <= 2:
        return path.copy()
    keep = [0] + [i for i in range(1, len(path) - 1) if not phi(model, path[i], scene)] + [len(path) - 1]
    pts = path[keep]
    out = [pts[0]]
    i = 0
    last = len(pts) - 1
    while i < last:
        nxt = i + 1
        for j in range(last, i + 1, -1):
            if steer_to(model, pts[i], pts[j], scene):
                nxt = j
                break
        out.append(pts[nxt])
        i = nxt
    return np.array(out)
