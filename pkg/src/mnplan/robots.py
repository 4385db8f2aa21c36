"""Robot models: configuration bounds, collision function, straight-line steering.

Configuration-space distance is Euclidean on coordinates normalized to
``[-1, 1]^d`` so that a single interpolation resolution ``delta_steer``
applies to positions and angles alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Scene, Workspace

KINDS = ("point2d", "point3d", "rigid2d", "nlink2d")
JOINT_LIMIT = 0.75 * math.pi


@dataclass(frozen=True, eq=False)
class RobotModel:
    kind: str
    lower: np.ndarray
    upper: np.ndarray
    half_extents: tuple = ()
    link_lengths: tuple = ()
    delta_steer: float = 0.01

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown robot kind {self.kind!r}")
        lo = np.array(self.lower, dtype=np.float64)
        hi = np.array(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("robot bounds must satisfy lower < upper")
        if self.delta_steer <= 0:
            raise ValueError("delta_steer must be positive")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "half_extents", tuple(float(h) for h in self.half_extents))
        object.__setattr__(self, "link_lengths", tuple(float(x) for x in self.link_lengths))
        object.__setattr__(self, "_scale", 2.0 / (hi - lo))
        object.__setattr__(self, "_links", np.array(self.link_lengths, dtype=np.float64))
        code = {"rigid2d": 1, "nlink2d": 2}.get(self.kind, 0)
        geom = self.half_extents if code == 1 else self.link_lengths
        object.__setattr__(self, "_code", code)
        object.__setattr__(self, "_geom", np.array(geom, dtype=np.float64).reshape(-1))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def position_dims(self) -> int:
        """Number of leading coordinates that are workspace positions."""
        return 3 if self.kind == "point3d" else 2

    def spec(self) -> dict:
        out = {"kind": self.kind, "delta_steer": self.delta_steer}
        if self.kind == "rigid2d":
            out["half_extents"] = list(self.half_extents)
        if self.kind == "nlink2d":
            out["link_lengths"] = list(self.link_lengths)
        return out

    # -- coordinate maps -------------------------------------------------
    def normalize(self, c):
        return (np.asarray(c, dtype=np.float64) - self.lower) * self._scale - 1.0

    def denormalize(self, v):
        return self.lower + (np.asarray(v, dtype=np.float64) + 1.0) / self._scale

    def clamp(self, c):
        return np.clip(c, self.lower, self.upper)

    def in_bounds(self, c) -> bool:
        c = np.asarray(c)
        return bool(np.all(c >= self.lower) and np.all(c <= self.upper))

    def distance(self, c1, c2) -> float:
        d = (np.asarray(c2, dtype=np.float64) - c1) * self._scale
        return float(math.sqrt(d @ d))

    def sample_uniform(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, size=None if size is None else (size, self.dim))

    # -- collision -------------------------------------------------------
    def _any_collides(self, configs, scene: Scene) -> bool:
        ws_lo, ws_hi = scene.workspace.lo, scene.workspace.hi
        if self.kind in ("point2d", "point3d"):
            return _kernels.points_collide(configs, scene.box_lo, scene.box_hi, ws_lo, ws_hi)
        if self.kind == "rigid2d":
            return _kernels.rects_collide(configs, self.half_extents, scene.box_lo, scene.box_hi, ws_lo, ws_hi)
        return _kernels.chains_collide(configs, self._links, scene.box_lo, scene.box_hi, ws_lo, ws_hi)

    def collision_mask(self, configs, scene: Scene) -> np.ndarray:
        """Per-row ``phi`` over an ``(K, d)`` array."""
        configs = np.atleast_2d(np.asarray(configs, dtype=np.float64))
        if self.kind in ("point2d", "point3d"):
            mask = _kernels.points_collide_mask(configs, scene.box_lo, scene.box_hi,
                                                scene.workspace.lo, scene.workspace.hi)
        else:
            mask = np.array([self._any_collides(c[None, :], scene) for c in configs], dtype=bool)
        out_of_bounds = np.any((configs < self.lower) | (configs > self.upper), axis=1)
        return mask | out_of_bounds


def _check_dim(model: RobotModel, c):
    c = np.ascontiguousarray(c, dtype=np.float64)
    if c.shape != (model.dim,):
        raise ValueError(f"configuration has shape {c.shape}, model expects ({model.dim},)")
    return c


def point2d(workspace: Workspace, delta_steer: float = 0.01) -> RobotModel:
    return RobotModel("point2d", workspace.lo, workspace.hi, delta_steer=delta_steer)


def point3d(workspace: Workspace, delta_steer: float = 0.01) -> RobotModel:
    return RobotModel("point3d", workspace.lo, workspace.hi, delta_steer=delta_steer)


def rigid2d(workspace: Workspace, half_extents=(1.5, 0.75), delta_steer: float = 0.01) -> RobotModel:
    lo = np.append(workspace.lo, -math.pi)
    hi = np.append(workspace.hi, math.pi)
    return RobotModel("rigid2d", lo, hi, half_extents=tuple(half_extents), delta_steer=delta_steer)


def nlink2d(workspace: Workspace, link_lengths=(3.0, 3.0), delta_steer: float = 0.01) -> RobotModel:
    k = len(link_lengths)
    if k < 1:
        raise ValueError("nlink2d needs at least one link")
    lo = np.concatenate([workspace.lo, np.full(k, -JOINT_LIMIT)])
    hi = np.concatenate([workspace.hi, np.full(k, JOINT_LIMIT)])
    return RobotModel("nlink2d", lo, hi, link_lengths=tuple(link_lengths), delta_steer=delta_steer)


DEFAULT_LINKS = {2: (3.0, 3.0), 3: (2.5, 2.5, 2.5)}


def make_robot(spec: dict, workspace: Workspace) -> RobotModel:
    """Build a model from a config mapping like ``{"kind": "nlink2d", "links": 3}``."""
    kind = spec.get("kind", "point2d")
    delta = float(spec.get("delta_steer", 0.01))
    if kind == "point2d":
        return point2d(workspace, delta)
    if kind == "point3d":
        return point3d(workspace, delta)
    if kind == "rigid2d":
        return rigid2d(workspace, spec.get("half_extents", (1.5, 0.75)), delta)
    if kind == "nlink2d":
        links = spec.get("link_lengths") or DEFAULT_LINKS[int(spec.get("links", 2))]
        return nlink2d(workspace, links, delta)
    raise ValueError(f"unknown robot kind {kind!r}")


def _segment_collides(model: RobotModel, c1, c2, scene: Scene) -> bool:
    return _kernels.steer_collides(model._code, c1, c2, model.lower, model.upper, model._scale,
                                   model.delta_steer, model._geom, scene.box_lo, scene.box_hi,
                                   scene.workspace.lo, scene.workspace.hi)


def phi(model: RobotModel, c, scene: Scene) -> bool:
    """Collision check: True means ``c`` is in collision (or out of bounds)."""
    c = _check_dim(model, c)
    return _segment_collides(model, c, c, scene)


def interpolate(model: RobotModel, c1, c2) -> np.ndarray:
    """Configurations at ``i/K`` for ``i = 0..K`` with ``K = ceil(dist / delta_steer)``."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    steps = math.ceil(model.distance(c1, c2) / model.delta_steer)
    if steps == 0:
        return c1[None, :].copy()
    t = np.arange(steps + 1, dtype=np.float64) / steps
    out = c1 + t[:, None] * (c2 - c1)
    out[-1] = c2
    return model.clamp(out)


def steer_to(model: RobotModel, c1, c2, scene: Scene) -> bool:
    """True when the straight segment ``c1 -> c2`` is collision free at the
    interpolation resolution of the model."""
    c1 = _check_dim(model, c1)
    c2 = _check_dim(model, c2)
    if tuple(c2) < tuple(c1):
        c1, c2 = c2, c1
    return not _segment_collides(model, c1, c2, scene)


def path_feasible(model: RobotModel, path, scene: Scene) -> bool:
    path = np.atleast_2d(np.asarray(path, dtype=np.float64))
    if len(path) == 0:
        raise ValueError("path must contain at least one waypoint")
    if phi(model, path[0], scene) or phi(model, path[-1], scene):
        return False
    return all(steer_to(model, path[i], path[i + 1], scene) for i in range(len(path) - 1))


def path_length(model: RobotModel, path) -> float:
    path = np.atleast_2d(np.asarray(path, dtype=np.float64))
    if len(path) == 0:
        raise ValueError("path must contain at least one waypoint")
    return float(sum(model.distance(path[i], path[i + 1]) for i in range(len(path) - 1)))


def forward_kinematics(model: RobotModel, c) -> np.ndarray:
    """Joint positions ``(k+1, 2)`` of an ``nlink2d`` configuration."""
    if model.kind != "nlink2d":
        raise ValueError("forward kinematics is defined for nlink2d models")
    c = _check_dim(model, c)
    return _kernels.chain_joints(c[None, :], model._links)[0]
