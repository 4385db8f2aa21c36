"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 planner failure in ``plan``,
1 any other stage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .. import BACKEND, __version__
from ..geometry import read_scene
from ..mdn import sample as gmm_sample
from . import config as C
from . import stages
from .svg import render_svg, write_svg

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_PLAN_FAILED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags without defaults so values given
    # before the subcommand are not overwritten
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", help="JSON run configuration (partial overrides allowed)", **kw)
    g.add_argument("--seed", type=int, help="master seed", **kw)
    g.add_argument("--out-dir", help="output directory", **kw)
    g.add_argument("--paper-scale", action="store_true", help="900/100 scenes, 400 paths per scene", **kw)
    g.add_argument("--strict-paper", action="store_true", help="disable the RRT fallback addition", **kw)
    g.add_argument("-v", "--verbose", action="count", **(kw or {"default": 0}))
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    p = _Parser(prog="mnplan", description="Neural motion planning toolkit", parents=[_global_flags(False)])
    p.add_argument("--version", action="version", version=f"mnplan {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen-envs", parents=[common], help="generate seen/unseen scene files")
    g = sub.add_parser("gen-data", parents=[common], help="run the expert planner and write the dataset")
    g.add_argument("--corridor", action="store_true", help="write the two-way corridor dataset instead")
    g.add_argument("--corridor-paths", type=int, default=200)

    for name, role in (("train", "mnp"), ("train-baseline", "mse_baseline")):
        t = sub.add_parser(name, parents=[common], help=f"train the {role} network")
        t.add_argument("--dataset", help="dataset file (default: <out-dir>/data/dataset.tsv)")
        t.add_argument("--checkpoint", help="checkpoint output path")
        t.set_defaults(role=role)

    pl = sub.add_parser("plan", parents=[common], help="solve one planning problem")
    pl.add_argument("--scene", required=True)
    pl.add_argument("--checkpoint", required=True)
    pl.add_argument("--start", type=float, nargs="+", required=True, help="e.g. -15 -15")
    pl.add_argument("--goal", type=float, nargs="+", required=True)
    pl.add_argument("--replanner", choices=("rrt", "neural", "none"), default="rrt")
    pl.add_argument("--trace", help="write one JSON line per bidirectional iteration")
    pl.add_argument("--svg", help="render the result")
    pl.add_argument("--path-out", help="write the path as JSON")

    b = sub.add_parser("bench", parents=[common], help="benchmark planners on the generated scenes")
    b.add_argument("--mnp", help="mnp checkpoint (default: <out-dir>/models/mnp.ckpt)")
    b.add_argument("--mse", help="baseline checkpoint (default: <out-dir>/models/mse_baseline.ckpt)")
    b.add_argument("--subset", choices=("seen", "unseen", "both"), default="both")

    v = sub.add_parser("viz", parents=[common], help="render a scene with paths, trace or samples")
    v.add_argument("--scene", required=True)
    v.add_argument("--path", action="append", default=[], help="JSON file with a list of waypoints")
    v.add_argument("--trace", help="trace file written by plan --trace")
    v.add_argument("--checkpoint", help="mnp checkpoint to draw next-configuration samples from")
    v.add_argument("--start", type=float, nargs="+")
    v.add_argument("--goal", type=float, nargs="+")
    v.add_argument("--samples", type=int, default=500)
    v.add_argument("--output", required=True)

    m = sub.add_parser("multimodal-eval", parents=[common], help="collision rate of predicted next configurations")
    m.add_argument("--mnp", required=True)
    m.add_argument("--mse", required=True)
    m.add_argument("--scene", help="scene file (default: corridor benchmark scene)")
    m.add_argument("--start", type=float, nargs="+")
    m.add_argument("--goal", type=float, nargs="+")
    m.add_argument("--n-draws", type=int, default=500)
    m.add_argument("--svg", help="render both sample clouds")
    return p


def resolve_config(args) -> C.RunConfig:
    # presets first so a config file can still override any field
    cfg = C.RunConfig()
    if args.paper_scale:
        cfg = C.paper_scale(cfg)
    if args.config:
        cfg = C.load_config(args.config, cfg)
    if args.strict_paper:
        cfg = C.strict_paper(cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    return C.validate(cfg)


def _config_pair(args, dim):
    pair = [np.array(v, dtype=np.float64) for v in (args.start, args.goal)]
    for v in pair:
        if v.shape != (dim,):
            raise C.ConfigError(f"configurations need {dim} values")
    return pair


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def cmd_gen_envs(cfg, args):
    names = stages.gen_envs(cfg)
    print(f"wrote {len(names)} scenes to {os.path.join(cfg.out_dir, stages.ENV_DIR)}")
    return EXIT_OK


def cmd_gen_data(cfg, args):
    if args.corridor:
        path = stages.corridor_data(cfg, n_paths=args.corridor_paths)
        print(f"wrote corridor dataset {path}")
        return EXIT_OK
    info = stages.gen_data(cfg)
    print(f"wrote {info['samples']} samples from {info['paths']} expert paths "
          f"({info['resamples']} resamples) to {info['dataset']}")
    return EXIT_OK


def cmd_train(cfg, args):
    path = stages.train(cfg, args.role, args.dataset, args.checkpoint)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_plan(cfg, args):
    from ..mnp import mnp_plan
    scene = read_scene(args.scene)
    net = stages.load_net(args.checkpoint)
    model = net.robot
    start, goal = _config_pair(args, model.dim)
    rng = np.random.default_rng(C.derive_seed(cfg.seed, C.STREAM_PLAN, 0))
    trace = [] if args.trace else None
    try:
        out = mnp_plan(model, scene, start, goal, net, stages.mnp_config(cfg, args.replanner), rng,
                       trace=trace)
    except ValueError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_PLAN_FAILED
    if trace is not None:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as f:
            for rec in trace:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    paths = [out.path] if out.success else []
    if args.svg:
        write_svg(args.svg, render_svg(scene, paths, trace=trace))
    if args.path_out and out.success:
        with open(args.path_out, "w", encoding="utf-8") as f:
            json.dump(out.path.tolist(), f)
    print(json.dumps({"status": out.status, "timings": out.timings, "config": out.config,
                      "replanned_segments": out.replan_segment_count,
                      "path": out.path.tolist() if out.success else []}))
    return EXIT_OK if out.success else EXIT_PLAN_FAILED


def cmd_bench(cfg, args):
    subsets = ("seen", "unseen") if args.subset == "both" else (args.subset,)
    res = stages.bench(cfg, args.mnp, args.mse, subsets)
    print(res["text"], end="")
    return EXIT_OK


def cmd_viz(cfg, args):
    scene = read_scene(args.scene)
    paths = [np.array(_read_json(p), dtype=np.float64) for p in args.path]
    trace = None
    if args.trace:
        with open(args.trace, encoding="utf-8") as f:
            trace = [json.loads(line) for line in f if line.strip()]
    samples = None
    if args.checkpoint:
        if args.start is None or args.goal is None:
            raise C.ConfigError("--checkpoint needs --start and --goal")
        net = stages.load_net(args.checkpoint)
        start, goal = _config_pair(args, net.robot.dim)
        rng = np.random.default_rng(C.derive_seed(cfg.seed, C.STREAM_PLAN, 1))
        z = net.encode(scene)
        if net.role == "mnp":
            samples = net.robot.denormalize(gmm_sample(net.gmm(z, start, goal), rng, args.samples))
        else:
            samples = net.propose(z, start, goal, args.samples, rng)
    write_svg(args.output, render_svg(scene, paths, samples=samples, trace=trace))
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_multimodal(cfg, args):
    from . import corridor
    if args.n_draws < 1:
        raise C.ConfigError("--n-draws must be >= 1")
    scene = read_scene(args.scene) if args.scene else corridor.corridor_scene(cfg.scenes.cloud_points)
    mnp_net, mse_net = stages.load_net(args.mnp), stages.load_net(args.mse)
    start, goal = corridor.EVAL_START, corridor.EVAL_GOAL
    if args.start is not None or args.goal is not None:
        start, goal = _config_pair(args, mnp_net.robot.dim)
    rng = np.random.default_rng(C.derive_seed(cfg.seed, C.STREAM_PLAN, 2))
    r_mnp, r_mse, d_mnp, d_mse = stages.multimodal_eval(mnp_net, mse_net, scene, start, goal, args.n_draws, rng)
    left, right = corridor.side_fractions(d_mnp)
    print(f"mnp_collision_rate {r_mnp:.4f}\nmse_collision_rate {r_mse:.4f}\n"
          f"mnp_left_fraction {left:.4f}\nmnp_right_fraction {right:.4f}")
    if args.svg:
        write_svg(args.svg, render_svg(scene, samples=np.vstack([d_mnp, d_mse])))
    return EXIT_OK


COMMANDS = {"gen-envs": cmd_gen_envs, "gen-data": cmd_gen_data, "train": cmd_train, "train-baseline": cmd_train,
            "plan": cmd_plan, "bench": cmd_bench, "viz": cmd_viz, "multimodal-eval": cmd_multimodal}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (stages.StageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
