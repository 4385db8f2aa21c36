"""Run configuration: schema, presets, validation and canonical serialization."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..geometry import SCENE_CLASSES
from ..nets import NetConfig, TrainConfig
from ..robots import KINDS

METHODS = ("mnp_origin", "mnp_rrt", "mse_nr", "mse_hr", "rrt_star", "irrt_star")

# seed streams, kept disjoint so sets never share a scene or problem
STREAM_SEEN, STREAM_UNSEEN, STREAM_DATA, STREAM_TRAIN, STREAM_BENCH, STREAM_PLAN = 1, 2, 3, 4, 5, 6


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class SceneConfig:
    scene_class: str = "simple2d"
    n_seen: int = 60
    n_unseen: int = 10
    cloud_points: int = 300


@dataclass(frozen=True)
class RobotConfig:
    kind: str = "point2d"
    links: int = 2
    half_extents: tuple = (1.5, 0.75)
    delta_steer: float = 0.01

    def spec(self) -> dict:
        return {"kind": self.kind, "links": self.links, "half_extents": list(self.half_extents),
                "delta_steer": self.delta_steer}


@dataclass(frozen=True)
class ExpertConfig:
    planner: str = "rrt_star"  # or "informed_rrt_star"
    paths_per_scene: int = 40
    max_iterations: int = 3000
    max_time: float = 20.0
    max_resamples: int = 1000


@dataclass(frozen=True)
class PlanConfig:
    n_iter: int = 50
    n_col: int = 10
    replan_iterations: int = 20000
    replan_time: float = 10.0
    rrt_fallback: bool = True
    neural_replan_attempts: int = 3


@dataclass(frozen=True)
class BenchConfig:
    problems_per_env: int = 10
    methods: tuple = METHODS
    classical_iterations: int = 20000
    classical_time: float = 20.0
    target_ratio: float = 1.1
    verify_iterations: int = 20000
    workers: int = 1
    max_envs: int = 0  # 0 means all


@dataclass(frozen=True)
class RunConfig:
    scenes: SceneConfig = SceneConfig()
    robot: RobotConfig = RobotConfig()
    expert: ExpertConfig = ExpertConfig()
    net: NetConfig = NetConfig().halved()
    train: TrainConfig = TrainConfig()
    plan: PlanConfig = PlanConfig()
    bench: BenchConfig = BenchConfig()
    seed: int = 0
    out_dir: str = "runs/default"
    strict_paper: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d))  # tuples -> lists

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha(self) -> str:
        return hashlib.sha1(self.to_json().encode()).hexdigest()


_SECTIONS = {"scenes": SceneConfig, "robot": RobotConfig, "expert": ExpertConfig, "net": NetConfig,
             "train": TrainConfig, "plan": PlanConfig, "bench": BenchConfig}


def _coerce(cls, name, value, default):
    where = f"{cls.__name__}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(value)
    return value


def _section(cls, data) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"section {cls.__name__} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {unknown}")
    base = cls()
    kw = {k: _coerce(cls, k, v, getattr(base, k)) for k, v in data.items()}
    return replace(base, **kw)


def from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay a (possibly partial) mapping onto ``base`` and validate."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    cfg = base or RunConfig()
    unknown = sorted(set(data) - set(_SECTIONS) - {"seed", "out_dir", "strict_paper"})
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    kw = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            merged = dict(asdict(getattr(cfg, name)))
            merged.update(data[name] if isinstance(data[name], dict) else {"": None})
            if "" in merged:
                raise ConfigError(f"section {name} must be an object")
            kw[name] = _section(cls, merged)
    for key, default in (("seed", 0), ("out_dir", ""), ("strict_paper", False)):
        if key in data:
            kw[key] = _coerce(RunConfig, key, data[key], default)
    cfg = replace(cfg, **kw)
    validate(cfg)
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return from_dict(data, base)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: RunConfig) -> RunConfig:
    s, r, e, p, b, n, t = cfg.scenes, cfg.robot, cfg.expert, cfg.plan, cfg.bench, cfg.net, cfg.train
    _require(s.scene_class in SCENE_CLASSES, f"unknown scene class {s.scene_class!r}")
    _require(s.n_seen >= 1 and s.n_unseen >= 0, "need n_seen >= 1 and n_unseen >= 0")
    _require(s.cloud_points >= 1, "cloud_points must be >= 1")
    _require(r.kind in KINDS, f"unknown robot kind {r.kind!r}")
    _require(r.links in (1, 2, 3) or r.kind != "nlink2d", "nlink2d supports 1 to 3 default links")
    _require(r.delta_steer > 0, "delta_steer must be positive")
    dim = SCENE_CLASSES[s.scene_class].dim
    _require((r.kind == "point3d") == (dim == 3), f"robot {r.kind} does not fit a {dim}D scene class")
    _require(len(r.half_extents) == 2 and all(h > 0 for h in r.half_extents), "half_extents must be 2 positives")
    _require(e.planner in ("rrt_star", "informed_rrt_star"), f"unknown expert planner {e.planner!r}")
    _require(e.paths_per_scene >= 1 and e.max_iterations >= 1 and e.max_time > 0, "expert budgets must be positive")
    _require(e.max_resamples >= 1, "max_resamples must be >= 1")
    _require(p.n_iter >= 1 and p.n_col >= 1, "n_iter and n_col must be >= 1")
    _require(p.replan_iterations >= 1 and p.replan_time > 0, "replan budget must be positive")
    _require(p.neural_replan_attempts >= 1, "neural_replan_attempts must be >= 1")
    _require(b.problems_per_env >= 1, "problems_per_env must be >= 1")
    _require(len(b.methods) >= 1 and all(m in METHODS for m in b.methods), f"methods must be drawn from {METHODS}")
    _require(len(set(b.methods)) == len(b.methods), "methods must be unique")
    _require(b.classical_iterations >= 1 and b.classical_time > 0, "classical budget must be positive")
    _require(b.target_ratio >= 1.0, "target_ratio must be >= 1")
    _require(b.workers >= 1 and b.max_envs >= 0 and b.verify_iterations >= 1, "bad bench worker/env settings")
    _require(all(v >= 1 for v in (*n.point_layers, *n.post_layers, *n.pnet_hidden)), "layer widths must be >= 1")
    _require(len(n.point_layers) >= 1 and len(n.post_layers) >= 1, "encoder needs at least one layer per stage")
    _require(n.q_mix >= 1 and 0.0 <= n.mse_dropout < 1.0, "q_mix >= 1 and 0 <= mse_dropout < 1")
    _require(t.epochs >= 1 and t.batch_size >= 1 and t.lr > 0 and t.patience >= 1, "bad training schedule")
    _require(0.0 <= t.val_fraction < 1.0, "val_fraction must be in [0, 1)")
    _require(0.0 <= t.beta1 < 1.0 and 0.0 <= t.beta2 < 1.0 and t.eps > 0, "bad Adam hyperparameters")
    _require(cfg.out_dir != "", "out_dir must not be empty")
    return cfg


def paper_scale(cfg: RunConfig) -> RunConfig:
    """Full-size preset: 900/100 scenes, 400 expert paths each, full clouds and widths."""
    cls = SCENE_CLASSES[cfg.scenes.scene_class]
    return replace(cfg, scenes=replace(cfg.scenes, n_seen=900, n_unseen=100, cloud_points=cls.cloud_points),
                   expert=replace(cfg.expert, paths_per_scene=400, max_iterations=20000, max_time=60.0),
                   net=NetConfig())


def strict_paper(cfg: RunConfig) -> RunConfig:
    """Disable additions that are not part of the published algorithm."""
    return replace(cfg, strict_paper=True, plan=replace(cfg.plan, rrt_fallback=False))


def derive_seed(master: int, stream: int, *index: int) -> int:
    """Independent 63-bit seed for ``(master, stream, index...)``."""
    state = np.random.SeedSequence([int(master), int(stream), *map(int, index)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def git_blob_sha(data: bytes) -> str:
    """Git-style content hash: ``sha1("blob <len>\\0" + data)``."""
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def file_sha(path) -> str:
    with open(path, "rb") as f:
        return git_blob_sha(f.read())
