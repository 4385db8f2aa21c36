"""Pipeline stages: scenes, expert data, training, benchmark, evaluation.

Layout under ``out_dir``::

    envs/seen/scene_0000.json ...   envs/unseen/...   envs/manifest.json
    data/dataset.tsv                data/expert_paths.tsv
    models/mnp.ckpt                 models/mse_baseline.ckpt
    bench/records.csv  bench/summary.txt  bench/summary.csv

Each artifact carries the run configuration (minus ``out_dir``) and the
git-style hash of the inputs it was derived from.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..classical import PlannerBudget, informed_rrt_star, path_simplify, rrt, rrt_star
from ..geometry import generate_scene, read_scene, save_scene, scene_class
from ..mnp import BiPlanConfig, MnpConfig, mnp_plan
from ..nets import Dataset, PlannerNet, read_dataset, train_mnp, train_mse_baseline, write_dataset
from ..robots import make_robot, path_length, phi, steer_to
from . import config as C

log = logging.getLogger(__name__)

ENV_DIR, DATA_DIR, MODEL_DIR, BENCH_DIR = "envs", "data", "models", "bench"
CHECKPOINT_NAMES = {"mnp": "mnp.ckpt", "mse_baseline": "mse_baseline.ckpt"}


class StageError(RuntimeError):
    """A stage could not run (missing inputs, unsolvable problems)."""


def artifact_config(cfg: C.RunConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out_dir")
    return d


def artifact_config_json(cfg: C.RunConfig) -> str:
    return json.dumps(artifact_config(cfg), sort_keys=True, separators=(",", ":"))


def robot_for(cfg: C.RunConfig, workspace):
    return make_robot(cfg.robot.spec(), workspace)


def _ensure(path):
    os.makedirs(path, exist_ok=True)
    return path


# -- environments ----------------------------------------------------------

def gen_envs(cfg: C.RunConfig) -> list[str]:
    """Write ``n_seen`` + ``n_unseen`` scene files and a manifest; returns relative names."""
    root = _ensure(os.path.join(cfg.out_dir, ENV_DIR))
    cls = scene_class(cfg.scenes.scene_class, cloud_points=cfg.scenes.cloud_points)
    names = []
    hashes = {}
    for subset, stream, count in (("seen", C.STREAM_SEEN, cfg.scenes.n_seen),
                                  ("unseen", C.STREAM_UNSEEN, cfg.scenes.n_unseen)):
        _ensure(os.path.join(root, subset))
        for i in range(count):
            name = f"{subset}/scene_{i:04d}.json"
            path = os.path.join(root, name)
            save_scene(generate_scene(cls, C.derive_seed(cfg.seed, stream, i)), path)
            hashes[name] = C.file_sha(path)
            names.append(name)
    manifest = {"kind": "mnplan-envs", "version": 1, "config": artifact_config(cfg), "files": hashes}
    with open(os.path.join(root, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return names


def list_envs(out_dir, subset: str) -> list[str]:
    path = os.path.join(out_dir, ENV_DIR, "manifest.json")
    if not os.path.exists(path):
        raise StageError(f"no environment manifest at {path}; run gen-envs first")
    with open(path, encoding="utf-8") as f:
        files = json.load(f)["files"]
    return sorted(n for n in files if n.startswith(subset + "/"))


def scene_loader(out_dir):
    cache = {}

    def load(name):
        if name not in cache:
            cache[name] = read_scene(os.path.join(out_dir, ENV_DIR, name))
        return cache[name]
    return load


# -- expert data -----------------------------------------------------------

def sample_problem(model, scene, rng, max_tries: int = 100_000):
    """Collision-free start/goal pair that is not straight-line connectable."""
    for _ in range(max_tries):
        a = model.sample_uniform(rng)
        b = model.sample_uniform(rng)
        if phi(model, a, scene) or phi(model, b, scene):
            continue
        if steer_to(model, a, b, scene):
            continue
        return a, b
    raise StageError("could not sample a non-trivial problem")


def expert_plan(model, scene, c_init, c_goal, ecfg: C.ExpertConfig, rng):
    budget = PlannerBudget(max_iterations=ecfg.max_iterations, max_time=ecfg.max_time)
    planner = informed_rrt_star if ecfg.planner == "informed_rrt_star" else rrt_star
    return planner(model, scene, c_init, c_goal, budget, rng)


@dataclass
class ExpertPath:
    scene_file: str
    index: int
    path: np.ndarray
    cost: float
    resamples: int


def expert_paths_for_scene(cfg: C.RunConfig, scene_idx: int, name: str, scene) -> list[ExpertPath]:
    model = robot_for(cfg, scene.workspace)
    out = []
    for j in range(cfg.expert.paths_per_scene):
        rng = np.random.default_rng(C.derive_seed(cfg.seed, C.STREAM_DATA, scene_idx, j))
        for attempt in range(cfg.expert.max_resamples):
            c_init, c_goal = sample_problem(model, scene, rng)
            res = expert_plan(model, scene, c_init, c_goal, cfg.expert, rng)
            if res.path is not None:
                p = path_simplify(model, res.path, scene)
                out.append(ExpertPath(name, j, p, path_length(model, p), attempt))
                break
        else:
            raise StageError(f"expert failed {cfg.expert.max_resamples} times on {name}")
    return out


def decompose(paths: list[ExpertPath], names: list[str], scenes: list) -> Dataset:
    """Each path ``c_0..c_l`` yields ``l`` samples ``(c_i, c_l, scene, c_{i+1})``."""
    index = {n: i for i, n in enumerate(names)}
    si, ct, cg, cn = [], [], [], []
    for ep in paths:
        p = ep.path
        for i in range(len(p) - 1):
            si.append(index[ep.scene_file])
            ct.append(p[i])
            cg.append(p[-1])
            cn.append(p[i + 1])
    d = scenes[0].workspace.dim if scenes else 2
    width = len(paths[0].path[0]) if paths else d
    empty = np.zeros((0, width))
    return Dataset(scenes, np.array(si, dtype=np.intp), ct or empty, cg or empty, cn or empty, list(names))


def gen_data(cfg: C.RunConfig) -> dict:
    """Run the expert over every seen scene and write the dataset files."""
    names = list_envs(cfg.out_dir, "seen")
    load = scene_loader(cfg.out_dir)
    scenes = [load(n) for n in names]
    paths = []
    for i, (name, scene) in enumerate(zip(names, scenes)):
        paths.extend(expert_paths_for_scene(cfg, i, name, scene))
        log.info("expert paths for %s done (%d/%d)", name, i + 1, len(names))
    data = decompose(paths, names, scenes)
    root = _ensure(os.path.join(cfg.out_dir, DATA_DIR))
    inputs = C.file_sha(os.path.join(cfg.out_dir, ENV_DIR, "manifest.json"))
    header = "mnplan-dataset v1 inputs=%s config=%s" % (inputs, artifact_config_json(cfg))
    ds_path = os.path.join(root, "dataset.tsv")
    write_dataset(ds_path, data, header)
    resamples = sum(p.resamples for p in paths)
    with open(os.path.join(root, "expert_paths.tsv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("# " + header + "\n")
        f.write("# scene_file\tpath_index\tcost\tresamples\twaypoints\n")
        for p in paths:
            wp = ";".join(" ".join("%.17g" % v for v in row) for row in p.path)
            f.write("%s\t%d\t%.17g\t%d\t%s\n" % (p.scene_file, p.index, p.cost, p.resamples, wp))
    log.info("dataset: %d samples from %d paths (%d expert resamples)", len(data), len(paths), resamples)
    return {"dataset": ds_path, "samples": len(data), "paths": len(paths), "resamples": resamples}


def load_dataset(cfg: C.RunConfig, path=None) -> Dataset:
    path = path or os.path.join(cfg.out_dir, DATA_DIR, "dataset.tsv")
    if not os.path.exists(path):
        raise StageError(f"no dataset at {path}; run gen-data first")
    base = os.path.dirname(os.path.dirname(os.path.abspath(path)))
    return read_dataset(path, scene_loader(base))


# -- training --------------------------------------------------------------

def train(cfg: C.RunConfig, role: str, dataset_path=None, ckpt_path=None) -> str:
    """Train one role on the run's dataset and write its checkpoint."""
    ds_path = dataset_path or os.path.join(cfg.out_dir, DATA_DIR, "dataset.tsv")
    data = load_dataset(cfg, ds_path)
    if len(data) == 0:
        raise StageError("dataset is empty")
    model = robot_for(cfg, data.scenes[0].workspace)
    seed = C.derive_seed(cfg.seed, C.STREAM_TRAIN, 0 if role == "mnp" else 1)
    trainer = train_mnp if role == "mnp" else train_mse_baseline
    dump = _ensure(os.path.join(cfg.out_dir, MODEL_DIR))
    net, _ = trainer(data, model, cfg.net, cfg.train, seed, dump_dir=dump)
    path = ckpt_path or os.path.join(dump, CHECKPOINT_NAMES[role])
    _ensure(os.path.dirname(os.path.abspath(path)))
    net.save(path, {"run_config": artifact_config(cfg), "inputs": C.file_sha(ds_path)})
    return path


def load_net(path) -> PlannerNet:
    if not os.path.exists(path):
        raise StageError(f"missing checkpoint {path}")
    return PlannerNet.load(path)


# -- benchmark -------------------------------------------------------------

@dataclass(frozen=True)
class BenchRecord:
    method: str
    env_id: str
    problem_id: int
    success: bool
    time: float
    length: float | None
    seen: bool

    def __post_init__(self):
        if (self.length is not None) != self.success or self.time < 0:
            raise ValueError("length must be present iff success, time must be >= 0")


def mnp_config(cfg: C.RunConfig, replanner: str) -> MnpConfig:
    p = cfg.plan
    fallback = p.rrt_fallback and not cfg.strict_paper
    return MnpConfig(BiPlanConfig(p.n_iter, p.n_col), replanner, fallback,
                     PlannerBudget(max_iterations=p.replan_iterations, max_time=p.replan_time),
                     p.neural_replan_attempts)


_NEURAL = {"mnp_origin": ("mnp", "none"), "mnp_rrt": ("mnp", "rrt"),
           "mse_nr": ("mse_baseline", "neural"), "mse_hr": ("mse_baseline", "rrt")}


def bench_problem(model, scene, seed: int, verify_iterations: int):
    """Sample a non-trivial problem whose solvability RRT confirms."""
    rng = np.random.default_rng(seed)
    budget = PlannerBudget(max_iterations=verify_iterations, max_time=1e9)
    for _ in range(1000):
        a, b = sample_problem(model, scene, rng)
        if rrt(model, scene, a, b, budget, rng).success:
            return a, b
    raise StageError("no solvable benchmark problem found")


def run_methods(cfg: C.RunConfig, model, scene, c_init, c_goal, nets: dict, seeds: dict,
                env_id: str, problem_id: int, seen: bool) -> list[BenchRecord]:
    """Run the configured methods on one problem. ``mnp_rrt`` runs first and
    its path length sets the target for the classical methods."""
    order = sorted(cfg.bench.methods, key=lambda m: (m != "mnp_rrt", C.METHODS.index(m)))
    recs = {}
    target = None
    for method in order:
        rng = np.random.default_rng(seeds[method])
        if method in _NEURAL:
            role, replanner = _NEURAL[method]
            out = mnp_plan(model, scene, c_init, c_goal, nets[role], mnp_config(cfg, replanner), rng)
            ok = out.success
            length = path_length(model, out.path) if ok else None
            recs[method] = BenchRecord(method, env_id, problem_id, ok, out.total_time, length, seen)
            if method == "mnp_rrt" and ok:
                target = cfg.bench.target_ratio * length
        else:
            budget = PlannerBudget(max_iterations=cfg.bench.classical_iterations,
                                   max_time=cfg.bench.classical_time, stop_at_cost=target)
            planner = informed_rrt_star if method == "irrt_star" else rrt_star
            res = planner(model, scene, c_init, c_goal, budget, rng)
            ok = res.success
            length = path_length(model, res.path) if ok else None
            recs[method] = BenchRecord(method, env_id, problem_id, ok, res.elapsed, length, seen)
    return [recs[m] for m in cfg.bench.methods]


def bench(cfg: C.RunConfig, mnp_ckpt=None, mse_ckpt=None, subsets=("seen", "unseen")) -> dict:
    """Benchmark every configured method; writes records and summaries."""
    need = {_NEURAL[m][0] for m in cfg.bench.methods if m in _NEURAL}
    model_dir = os.path.join(cfg.out_dir, MODEL_DIR)
    paths = {"mnp": mnp_ckpt or os.path.join(model_dir, CHECKPOINT_NAMES["mnp"]),
             "mse_baseline": mse_ckpt or os.path.join(model_dir, CHECKPOINT_NAMES["mse_baseline"])}
    nets = {role: load_net(paths[role]) for role in sorted(need)}
    load = scene_loader(cfg.out_dir)
    tasks = []
    for subset in subsets:
        names = list_envs(cfg.out_dir, subset)
        if cfg.bench.max_envs:
            names = names[:cfg.bench.max_envs]
        for e, name in enumerate(names):
            for p in range(cfg.bench.problems_per_env):
                tasks.append((subset == "seen", e, name, p))

    def run(task):
        seen, e, name, p = task
        scene = load(name)
        model = robot_for(cfg, scene.workspace)
        flag = 1 if seen else 0
        c_init, c_goal = bench_problem(model, scene, C.derive_seed(cfg.seed, C.STREAM_BENCH, flag, e, p),
                                       cfg.bench.verify_iterations)
        seeds = {m: C.derive_seed(cfg.seed, C.STREAM_BENCH, flag, e, p, 1 + k) for k, m in enumerate(C.METHODS)}
        return run_methods(cfg, model, scene, c_init, c_goal, nets, seeds, name, p, seen)

    # scenes are loaded once up front so worker threads only read shared state
    for t in tasks:
        load(t[2])
    if cfg.bench.workers > 1:
        with ThreadPoolExecutor(cfg.bench.workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    records = [r for group in results for r in group]
    records.sort(key=lambda r: (not r.seen, r.env_id, r.problem_id, C.METHODS.index(r.method)))
    rows = summarize(records, cfg.bench.methods)
    root = _ensure(os.path.join(cfg.out_dir, BENCH_DIR))
    header = "mnplan-bench v1 inputs=%s config=%s" % (
        ",".join(C.file_sha(paths[r]) for r in sorted(need)), artifact_config_json(cfg))
    write_records_csv(os.path.join(root, "records.csv"), records, header)
    text = format_summary(rows)
    with open(os.path.join(root, "summary.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write("# " + header + "\n" + text)
    write_summary_csv(os.path.join(root, "summary.csv"), rows, header)
    return {"records": records, "summary": rows, "text": text}


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else math.nan


def summarize(records, methods=C.METHODS) -> list[dict]:
    """One row per (method, seen/unseen): success rate, time over all runs and
    over successes only, and mean length of successful paths."""
    rows = []
    for m in methods:
        for seen in (True, False):
            rs = [r for r in records if r.method == m and r.seen == seen]
            ok = [r for r in rs if r.success]
            rows.append({"method": m, "set": "seen" if seen else "unseen", "n": len(rs),
                         "success_rate": _mean([float(r.success) for r in rs]),
                         "time_all": _mean([r.time for r in rs]),
                         "time_success": _mean([r.time for r in ok]),
                         "length": _mean([r.length for r in ok])})
    return rows


SUMMARY_COLUMNS = ("method", "set", "n", "success_rate", "time_all", "time_success", "length")


def _cell(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else "%.6g" % v
    return str(v)


def format_summary(rows) -> str:
    table = [list(SUMMARY_COLUMNS)] + [[_cell(r[c]) for c in SUMMARY_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(SUMMARY_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) if i > 1 else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             .rstrip() for row in table]
    return "\n".join(lines) + "\n"


def write_summary_csv(path, rows, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header:
            f.write("# " + header + "\n")
        f.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in rows:
            f.write(",".join(_cell(r[c]) for c in SUMMARY_COLUMNS) + "\n")


def write_records_csv(path, records, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header:
            f.write("# " + header + "\n")
        f.write("method,env_id,problem_id,seen,success,time,length\n")
        for r in records:
            f.write("%s,%s,%d,%d,%d,%.9f,%s\n" % (r.method, r.env_id, r.problem_id, r.seen, r.success, r.time,
                                                 "" if r.length is None else "%.17g" % r.length))


# -- multimodality -----------------------------------------------------------

def multimodal_eval(mnp_net: PlannerNet, mse_net: PlannerNet, scene, c_t, c_goal, n_draws: int, rng):
    """Collision rates of ``n_draws`` next-configuration draws from each model.

    The MSE model keeps dropout active so repeated forward passes differ.
    Returns ``(mnp_rate, mse_rate, mnp_draws, mse_draws)``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    model = mnp_net.robot
    mnp_draws = mnp_net.propose(mnp_net.encode(scene), c_t, c_goal, n_draws, rng)
    mse_draws = mse_net.propose(mse_net.encode(scene), c_t, c_goal, n_draws, rng)
    rate = lambda draws: float(np.mean(model.collision_mask(draws, scene)))  # noqa: E731
    return rate(mnp_draws), rate(mse_draws), mnp_draws, mse_draws


def corridor_data(cfg: C.RunConfig, n_paths: int = 200, iterations: int = 1500) -> str:
    """Write the corridor scene and its expert dataset under ``out_dir/corridor``."""
    from .corridor import corridor_dataset, corridor_scene
    root = _ensure(os.path.join(cfg.out_dir, "corridor"))
    envs = _ensure(os.path.join(root, ENV_DIR))
    scene = corridor_scene(cfg.scenes.cloud_points, seed=C.derive_seed(cfg.seed, C.STREAM_DATA, 0))
    save_scene(scene, os.path.join(envs, "corridor.json"))
    data, _ = corridor_dataset(scene, n_paths, iterations, seed=C.derive_seed(cfg.seed, C.STREAM_DATA, 1))
    data_dir = _ensure(os.path.join(root, DATA_DIR))
    path = os.path.join(data_dir, "dataset.tsv")
    header = "mnplan-dataset v1 inputs=%s config=%s" % (C.file_sha(os.path.join(envs, "corridor.json")),
                                                      artifact_config_json(cfg))
    write_dataset(path, data, header)
    return path


