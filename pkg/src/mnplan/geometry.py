"""Workspace, box obstacles, obstacle point clouds and exact intersection tests."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels

SCENE_FORMAT_VERSION = 1


class SceneGenerationError(RuntimeError):
    """Raised when obstacle placement keeps being rejected (over-dense config)."""


@dataclass(frozen=True, eq=False)
class Workspace:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).copy()
        hi = np.asarray(self.hi, dtype=np.float64).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size not in (2, 3):
            raise ValueError("workspace bounds must be matching vectors of length 2 or 3")
        if not np.all(lo < hi):
            raise ValueError("workspace requires lo < hi on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def normalize(self, points):
        """Affine map of workspace points onto ``[-1, 1]^m``."""
        return 2.0 * (np.asarray(points) - self.lo) / (self.hi - self.lo) - 1.0


@dataclass(frozen=True, eq=False)
class BoxObstacle:
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).copy()
        h = np.asarray(self.half_extents, dtype=np.float64).copy()
        if c.shape != h.shape or c.ndim != 1:
            raise ValueError("center and half_extents must be vectors of equal length")
        if not np.all(h > 0):
            raise ValueError("half_extents must be strictly positive")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)

    @property
    def lo(self):
        return self.center - self.half_extents

    @property
    def hi(self):
        return self.center + self.half_extents

    def face_measures(self) -> np.ndarray:
        """Measure of one face normal to each axis (edge length in 2D, area in 3D)."""
        full = 2.0 * self.half_extents
        return np.array([np.prod(np.delete(full, k)) for k in range(full.size)])

    def boundary_measure(self) -> float:
        return float(2.0 * self.face_measures().sum())


@dataclass(frozen=True, eq=False)
class Scene:
    workspace: Workspace
    obstacles: tuple = ()
    cloud: np.ndarray = None
    seed: int = 0
    box_lo: np.ndarray = field(init=False, repr=False)
    box_hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.workspace.dim
        obstacles = tuple(self.obstacles)
        for ob in obstacles:
            if ob.center.size != m:
                raise ValueError("obstacle dimension does not match workspace")
            if np.any(ob.lo < self.workspace.lo) or np.any(ob.hi > self.workspace.hi):
                raise ValueError("obstacle extends outside the workspace")
        object.__setattr__(self, "obstacles", obstacles)
        cloud = np.zeros((0, m)) if self.cloud is None else np.asarray(self.cloud, dtype=np.float64)
        cloud = np.ascontiguousarray(cloud.reshape(-1, m))
        cloud.setflags(write=False)
        object.__setattr__(self, "cloud", cloud)
        if obstacles:
            lo = np.array([ob.lo for ob in obstacles])
            hi = np.array([ob.hi for ob in obstacles])
        else:
            lo = np.zeros((0, m))
            hi = np.zeros((0, m))
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def dim(self) -> int:
        return self.workspace.dim

    def with_cloud(self, cloud) -> "Scene":
        return replace(self, cloud=cloud)

    def normalized_cloud(self) -> np.ndarray:
        return self.workspace.normalize(self.cloud)

    def cloud_on_boundary(self, tol: float = 1e-9) -> bool:
        """True if every cloud point lies on the surface of at least one obstacle."""
        if not len(self.cloud):
            return True
        p = self.cloud[:, None, :]
        inside = np.all((p >= self.box_lo - tol) & (p <= self.box_hi + tol), axis=2)
        on_face = np.any((np.abs(p - self.box_lo) <= tol) | (np.abs(p - self.box_hi) <= tol), axis=2)
        return bool(np.all(np.any(inside & on_face, axis=1)))

    def to_json(self) -> str:
        return dump_scene(self)


@dataclass(frozen=True)
class SceneClass:
    """Procedural scene family: ``n_obstacles`` axis-aligned cubes of side ``side``
    placed uniformly inside ``[-bound, bound]^dim``."""

    name: str
    dim: int
    n_obstacles: int
    side: float = 5.0
    bound: float = 20.0
    cloud_points: int = 1400
    min_separation: float = 0.0
    max_attempts: int = 10_000


SCENE_CLASSES = {
    "simple2d": SceneClass("simple2d", dim=2, n_obstacles=7, cloud_points=1400),
    "complex3d": SceneClass("complex3d", dim=3, n_obstacles=10, cloud_points=1000),
}


def scene_class(name: str, **overrides) -> SceneClass:
    if name not in SCENE_CLASSES:
        raise ValueError(f"unknown scene class {name!r}; expected one of {sorted(SCENE_CLASSES)}")
    return replace(SCENE_CLASSES[name], **overrides)


def generate_scene(cls, rng_seed: int) -> Scene:
    """Deterministically generate a scene (obstacles + surface cloud) from a seed.

    ``cls`` is a scene-class name or a :class:`SceneClass`. Obstacles may
    overlap; with ``min_separation > 0`` centers closer than that (Chebyshev
    distance) are rejected and :class:`SceneGenerationError` is raised once
    ``max_attempts`` draws have been spent.
    """
    if isinstance(cls, str):
        cls = scene_class(cls)
    if cls.n_obstacles < 1:
        raise ValueError("scene class needs at least one obstacle")
    rng = np.random.default_rng(rng_seed)
    ws = Workspace(np.full(cls.dim, -cls.bound), np.full(cls.dim, cls.bound))
    half = 0.5 * cls.side
    if half >= cls.bound:
        raise SceneGenerationError("obstacle side does not fit in the workspace")
    centers = []
    attempts = 0
    while len(centers) < cls.n_obstacles:
        if attempts >= cls.max_attempts:
            raise SceneGenerationError(
                f"placed {len(centers)}/{cls.n_obstacles} obstacles after {attempts} attempts"
            )
        attempts += 1
        c = rng.uniform(ws.lo + half, ws.hi - half)
        if cls.min_separation > 0 and centers:
            gaps = np.max(np.abs(np.array(centers) - c), axis=1)
            if np.any(gaps < cls.min_separation):
                continue
        centers.append(c)
    obstacles = tuple(BoxObstacle(c, np.full(cls.dim, half)) for c in centers)
    bare = Scene(ws, obstacles, None, rng_seed)
    cloud_seed = int(rng.integers(0, 2**63))
    return bare.with_cloud(sample_cloud(bare, cls.cloud_points, cloud_seed))


def sample_cloud(scene: Scene, n: int, rng_seed: int) -> np.ndarray:
    """Sample ``n`` points uniformly over the union of obstacle surfaces.

    Each point picks an obstacle with probability proportional to its
    boundary measure, then a face proportional to face measure, then a
    uniform location on that face.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not scene.obstacles:
        raise ValueError("cannot sample a cloud from a scene without obstacles")
    rng = np.random.default_rng(rng_seed)
    m = scene.dim
    faces = np.array([ob.face_measures() for ob in scene.obstacles])  # (B, m)
    weights = np.concatenate([faces, faces], axis=1)  # lo faces then hi faces
    flat = weights.ravel() / weights.sum()
    pick = rng.choice(flat.size, size=n, p=flat)
    ob_idx, face = np.divmod(pick, 2 * m)
    axis = face % m
    upper = face >= m
    u = rng.uniform(-1.0, 1.0, size=(n, m))
    centers = np.array([ob.center for ob in scene.obstacles])[ob_idx]
    halves = np.array([ob.half_extents for ob in scene.obstacles])[ob_idx]
    pts = centers + u * halves
    rows = np.arange(n)
    sign = np.where(upper, 1.0, -1.0)
    pts[rows, axis] = centers[rows, axis] + sign * halves[rows, axis]
    return pts


def point_in_obstacle(p, scene: Scene) -> bool:
    """Closed-set membership in any obstacle; leaving the workspace counts too."""
    p = np.asarray(p, dtype=np.float64).reshape(1, -1)
    return _kernels.points_collide(p, scene.box_lo, scene.box_hi, scene.workspace.lo, scene.workspace.hi)


def segment_hits_obstacle(a, b, scene: Scene) -> bool:
    """Exact slab test of the closed segment ``[a, b]`` against every obstacle."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    # fixed endpoint order keeps the result symmetric under floating point
    if tuple(b) < tuple(a):
        a, b = b, a
    return _kernels.segment_collides(a, b, scene.box_lo, scene.box_hi, scene.workspace.lo, scene.workspace.hi)


def rect_hits_obstacle(center, half_extents, angle: float, scene: Scene) -> bool:
    """Separating-axis test of an oriented rectangle against the scene."""
    if scene.dim != 2:
        raise ValueError("rectangle test requires a 2D scene")
    pose = np.array([[center[0], center[1], angle]], dtype=np.float64)
    return _kernels.rects_collide(
        pose, np.asarray(half_extents, dtype=np.float64),
        scene.box_lo, scene.box_hi, scene.workspace.lo, scene.workspace.hi,
    )


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def dump_scene(scene: Scene) -> str:
    """Serialize with fixed field order and 17 significant digits."""
    obs = ", ".join(
        '{"center": %s, "half_extents": %s}' % (_vec(o.center), _vec(o.half_extents))
        for o in scene.obstacles
    )
    cloud = ", ".join(_vec(p) for p in scene.cloud)
    return (
        '{"version": %d, "dim": %d, "lo": %s, "hi": %s, "seed": %d, '
        '"obstacles": [%s], "cloud": [%s]}\n'
        % (SCENE_FORMAT_VERSION, scene.dim, _vec(scene.workspace.lo), _vec(scene.workspace.hi),
           scene.seed, obs, cloud)
    )


def load_scene(text: str) -> Scene:
    data = json.loads(text)
    if data.get("version") != SCENE_FORMAT_VERSION:
        raise ValueError(f"unsupported scene format version {data.get('version')!r}")
    ws = Workspace(data["lo"], data["hi"])
    if ws.dim != data["dim"]:
        raise ValueError("scene dim does not match its bounds")
    obstacles = tuple(BoxObstacle(o["center"], o["half_extents"]) for o in data["obstacles"])
    cloud = np.array(data["cloud"], dtype=np.float64).reshape(-1, ws.dim)
    return Scene(ws, obstacles, cloud, data["seed"])


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_scene(scene))


def read_scene(path) -> Scene:
    with open(path, encoding="utf-8") as f:
        return load_scene(f.read())


def empty_scene(dim: int = 2, bound: float = 20.0) -> Scene:
    ws = Workspace(np.full(dim, -bound), np.full(dim, bound))
    return Scene(ws, (), None, 0)
