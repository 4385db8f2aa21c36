"""Online planning with a trained network: bidirectional extension, replanning
with RRT, and the complete planner with its completeness backstop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .classical import PlannerBudget, path_simplify, rrt
from .robots import RobotModel, path_feasible, phi, steer_to

DIRECT = "direct_success"
REPLANNED = "replanned_success"
FAILURE = "failure"


@dataclass(frozen=True)
class BiPlanConfig:
    n_iter: int = 50
    n_col: int = 10

    def __post_init__(self):
        if self.n_iter < 1 or self.n_col < 1:
            raise ValueError("n_iter and n_col must be >= 1")


@dataclass(frozen=True)
class MnpConfig:
    bi: BiPlanConfig = BiPlanConfig()
    replanner: str = "rrt"  # "rrt", "neural" or "none"
    rrt_fallback: bool = True
    replan_budget: PlannerBudget = PlannerBudget(max_iterations=20_000, max_time=10.0)
    neural_replan_attempts: int = 3

    def __post_init__(self):
        if self.replanner not in ("rrt", "neural", "none"):
            raise ValueError(f"unknown replanner {self.replanner!r}")


@dataclass
class PlanOutcome:
    path: np.ndarray | None
    status: str
    timings: dict = field(default_factory=dict)
    replan_segment_count: int = 0
    config: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status != FAILURE

    @property
    def total_time(self) -> float:
        return float(self.timings.get("total", 0.0))


def bidirectional_plan(model: RobotModel, scene, c_init, c_goal, net, z, config: BiPlanConfig, rng,
                       trace: list | None = None):
    """Grow one partial path from each endpoint, alternating sides, until the
    two ends can be joined by a straight segment.

    Each outer iteration evaluates the network once at
    ``(tau_a[-1], tau_b[-1])`` and draws up to ``n_col`` candidates; the first
    one reachable from ``tau_a[-1]`` is appended, otherwise the last draw is
    appended anyway. Returns the joined path (init -> goal) or ``None``.
    """
    c_init = np.asarray(c_init, dtype=np.float64)
    c_goal = np.asarray(c_goal, dtype=np.float64)
    if steer_to(model, c_init, c_goal, scene):
        return np.array([c_init, c_goal])
    tau_a, tau_b = [c_init], [c_goal]
    a_is_start = True
    for it in range(config.n_iter):
        if __debug__:
            ends = {tuple(tau_a[0]), tuple(tau_b[0])}
            assert ends == {tuple(c_init), tuple(c_goal)}
        candidates = net.propose(z, tau_a[-1], tau_b[-1], config.n_col, rng)
        chosen, ok = candidates[-1], False
        for c_new in candidates:
            if steer_to(model, tau_a[-1], c_new, scene):
                chosen, ok = c_new, True
                break
        tau_a.append(chosen)
        joined = steer_to(model, tau_a[-1], tau_b[-1], scene)
        if trace is not None:
            trace.append({"iter": it, "side": "init" if a_is_start else "goal",
                          "candidate": chosen.tolist(), "steer": ok, "joined": joined})
        if joined:
            start, end = (tau_a, tau_b) if a_is_start else (tau_b, tau_a)
            return np.array(start + end[::-1])
        tau_a, tau_b = tau_b, tau_a
        a_is_start = not a_is_start
    return None


def rrt_connector(model, scene, budget: PlannerBudget):
    """Wrap :func:`rrt` as a ``planner(c_a, c_b, rng) -> path | None`` callable."""
    def plan(c_a, c_b, rng):
        if phi(model, c_a, scene) or phi(model, c_b, scene):
            return None
        return rrt(model, scene, c_a, c_b, budget, rng).path
    return plan


def neural_connector(model, scene, net, z, config: BiPlanConfig, attempts: int = 1):
    def plan(c_a, c_b, rng):
        for _ in range(attempts):
            p = bidirectional_plan(model, scene, c_a, c_b, net, z, config, rng)
            if p is not None:
                p = path_simplify(model, p, scene)
                if path_feasible(model, p, scene):
                    return p
        return None
    return plan


def replan(model: RobotModel, scene, path, planner, rng):
    """Simplify, then keep feasible adjacent pairs and re-solve the others with
    ``planner``. Returns ``(path, n_replanned_segments)``; path is None when a
    segment cannot be repaired."""
    path = path_simplify(model, path, scene)
    out = [path[0]]
    repaired = 0
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        if steer_to(model, a, b, scene):
            out.append(b)
            continue
        connector = planner(a, b, rng)
        if connector is None:
            return None, repaired
        connector = path_simplify(model, connector, scene)
        out.extend(connector[1:])
        repaired += 1
    return np.array(out), repaired


def _outcome(path, status, timings, repaired, config):
    return PlanOutcome(path, status, timings, repaired,
                       {"n_iter": config.bi.n_iter, "n_col": config.bi.n_col, "replanner": config.replanner,
                        "rrt_fallback": config.rrt_fallback})


def mnp_plan(model: RobotModel, scene, c_init, c_goal, net, config: MnpConfig, rng, z=None,
             trace: list | None = None) -> PlanOutcome:
    """Encode the scene, plan bidirectionally, simplify, and repair if needed.

    ``config.replanner == "none"`` gives the network-only planner. With
    ``rrt_fallback`` an empty bidirectional result falls back to plain RRT
    between the endpoints.
    """
    c_init = np.asarray(c_init, dtype=np.float64)
    c_goal = np.asarray(c_goal, dtype=np.float64)
    if phi(model, c_init, scene) or phi(model, c_goal, scene):
        raise ValueError("plan endpoints must be collision free")
    t0 = time.perf_counter()
    timings = {}
    if z is None:
        z = net.encode(scene)
    t1 = time.perf_counter()
    timings["encode"] = t1 - t0
    path = bidirectional_plan(model, scene, c_init, c_goal, net, z, config.bi, rng, trace)
    t2 = time.perf_counter()
    timings["bidirectional"] = t2 - t1

    if path is None:
        if config.rrt_fallback and config.replanner == "rrt":
            res = rrt(model, scene, c_init, c_goal, config.replan_budget, rng)
            t3 = time.perf_counter()
            timings["replan"] = t3 - t2
            timings["total"] = t3 - t0
            if res.path is None:
                return _outcome(None, FAILURE, timings, 0, config)
            return _outcome(path_simplify(model, res.path, scene), REPLANNED, timings, 1, config)
        timings["total"] = t2 - t0
        return _outcome(None, FAILURE, timings, 0, config)

    path = path_simplify(model, path, scene)
    t3 = time.perf_counter()
    timings["simplify"] = t3 - t2
    if path_feasible(model, path, scene):
        timings["total"] = time.perf_counter() - t0
        return _outcome(path, DIRECT, timings, 0, config)
    if config.replanner == "none":
        timings["total"] = time.perf_counter() - t0
        return _outcome(None, FAILURE, timings, 0, config)

    if config.replanner == "rrt":
        planner = rrt_connector(model, scene, config.replan_budget)
    else:
        planner = neural_connector(model, scene, net, z, config.bi, config.neural_replan_attempts)
    new_path, repaired = replan(model, scene, path, planner, rng)
    t4 = time.perf_counter()
    timings["replan"] = t4 - t3
    timings["total"] = t4 - t0
    if new_path is None or not path_feasible(model, new_path, scene):
        return _outcome(None, FAILURE, timings, repaired, config)
    return _outcome(new_path, REPLANNED, timings, repaired, config)
