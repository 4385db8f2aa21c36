import json
import os

import numpy as np
import pytest

from mnplan.geometry import read_scene
from mnplan.pipeline import config as C
from mnplan.pipeline import stages
from mnplan.pipeline.cli import main
from mnplan.pipeline.svg import render_svg

from .conftest import make_scene

TINY = {"scenes": {"n_seen": 3, "n_unseen": 1, "cloud_points": 100},
        "expert": {"paths_per_scene": 4, "max_iterations": 800},
        "net": {"point_layers": [8, 16], "post_layers": [16], "pnet_hidden": [32, 32]},
        "train": {"epochs": 10, "batch_size": 32, "lr": 0.001},
        "bench": {"problems_per_env": 1, "classical_iterations": 1000, "verify_iterations": 3000}}


def _cfg(out, **extra):
    d = json.loads(json.dumps(TINY))
    d.update(extra)
    return C.validate(C.from_dict(dict(d, out_dir=str(out))))


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = _cfg(out)
    stages.gen_envs(cfg)
    stages.gen_data(cfg)
    stages.train(cfg, "mnp")
    stages.train(cfg, "mse_baseline")
    return cfg


def test_defaults_and_validation():
    cfg = C.validate(C.RunConfig())
    assert cfg.scenes.n_seen == 60 and cfg.scenes.n_unseen == 10
    with pytest.raises(C.ConfigError):
        C.from_dict({"bogus": 1})
    with pytest.raises(C.ConfigError):
        C.from_dict({"scenes": {"n_seen": "many"}})
    with pytest.raises(C.ConfigError):
        C.validate(C.from_dict({"plan": {"n_iter": 0}}))
    with pytest.raises(C.ConfigError):
        C.validate(C.from_dict({"bench": {"methods": ["teleport"]}}))


def test_paper_scale_and_strict():
    cfg = C.paper_scale(C.RunConfig())
    assert (cfg.scenes.n_seen, cfg.scenes.n_unseen) == (900, 100)
    assert cfg.expert.paths_per_scene == 400 and cfg.net.pnet_hidden == (512, 512, 256)
    strict = C.strict_paper(C.RunConfig())
    assert strict.strict_paper and not stages.mnp_config(strict, "rrt").rrt_fallback


def test_config_file_roundtrip(tmp_path):
    cfg = _cfg(tmp_path, seed=5)
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert C.load_config(p) == cfg and C.load_config(p).sha() == cfg.sha()


def test_derive_seed_streams_differ():
    assert C.derive_seed(0, C.STREAM_SEEN, 0) != C.derive_seed(0, C.STREAM_UNSEEN, 0)
    assert C.derive_seed(0, C.STREAM_SEEN, 1) == C.derive_seed(0, C.STREAM_SEEN, 1)
    assert C.git_blob_sha(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_gen_envs_default_counts_and_determinism(tmp_path):
    cfg = C.validate(C.from_dict({"scenes": {"cloud_points": 20}, "out_dir": str(tmp_path / "a")}))
    names = stages.gen_envs(cfg)
    assert len(names) == 70
    seen, unseen = stages.list_envs(cfg.out_dir, "seen"), stages.list_envs(cfg.out_dir, "unseen")
    assert len(seen) == 60 and len(unseen) == 10
    load = stages.scene_loader(cfg.out_dir)
    seen_boxes = {load(n).box_lo.tobytes() for n in seen}
    assert not seen_boxes & {load(n).box_lo.tobytes() for n in unseen}
    other = C.validate(C.from_dict({"scenes": {"cloud_points": 20}, "out_dir": str(tmp_path / "b")}))
    stages.gen_envs(other)
    for n in names + ["manifest.json"]:
        a = (tmp_path / "a" / "envs" / n).read_bytes()
        assert a == (tmp_path / "b" / "envs" / n).read_bytes()


def test_gen_data_counts(run):
    data = stages.load_dataset(run)
    lines = open(os.path.join(run.out_dir, "data", "expert_paths.tsv")).read().splitlines()
    paths = [l for l in lines if not l.startswith("#")]
    assert len(paths) == 3 * 4
    waypoints = sum(len(l.split("\t")[4].split(";")) for l in paths)
    assert len(data) == waypoints - len(paths)
    head = open(os.path.join(run.out_dir, "data", "dataset.tsv")).readline()
    assert head.startswith("# mnplan-dataset v1 inputs=") and run.out_dir not in head


def test_gen_data_requires_envs(tmp_path):
    with pytest.raises(stages.StageError):
        stages.gen_data(_cfg(tmp_path))


def test_bench_structure(run):
    res = stages.bench(run)
    assert len(res["summary"]) == len(C.METHODS) * 2
    assert len(res["records"]) == len(C.METHODS) * 4
    for r in res["records"]:
        assert (r.length is not None) == r.success and r.time >= 0
    text = open(os.path.join(run.out_dir, "bench", "summary.txt")).read()
    assert text.startswith("# mnplan-bench v1") and "time_success" in text
    with pytest.raises(ValueError):
        stages.BenchRecord("rrt_star", "e", 0, True, 0.1, None, True)


def test_summary_means():
    recs = [stages.BenchRecord("rrt_star", "e", i, i < 2, float(i + 1), 1.0 if i < 2 else None, True)
            for i in range(4)]
    row = [r for r in stages.summarize(recs) if r["method"] == "rrt_star" and r["set"] == "seen"][0]
    assert row["success_rate"] == 0.5 and row["time_all"] == 2.5 and row["time_success"] == 1.5


def test_multimodal_eval(run):
    mnp = stages.load_net(os.path.join(run.out_dir, "models", "mnp.ckpt"))
    mse = stages.load_net(os.path.join(run.out_dir, "models", "mse_baseline.ckpt"))
    far = make_scene([((19.9, 19.9), (0.05, 0.05))], cloud=20)
    with pytest.raises(ValueError):
        stages.multimodal_eval(mnp, mse, far, [-10, 0], [10, 0], 0, np.random.default_rng(0))
    # a speck in the corner is the only obstacle, so neither model collides
    r_mnp, r_mse, d_mnp, d_mse = stages.multimodal_eval(mnp, mse, far, [-10, 0], [10, 0], 200,
                                                        np.random.default_rng(0))
    assert r_mnp == r_mse == 0.0 and d_mnp.shape == d_mse.shape == (200, 2)


def test_svg_single_path_line_and_determinism():
    scene = make_scene([((0.0, 0.0), (2.0, 2.0))])
    svg = render_svg(scene, [np.array([[-10.0, -10.0], [10.0, -10.0]])])
    assert svg.count("<line") == 1 and svg == render_svg(scene, [np.array([[-10.0, -10.0], [10.0, -10.0]])])
    assert svg.startswith("<svg") or svg.startswith("<?xml")


def test_cli_full_flow_and_exit_codes(run, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(TINY))
    out = tmp_path / "cli"
    base = ["--config", str(cfg_path), "--out-dir", str(out), "--seed", "0"]
    assert main(base + ["gen-envs"]) == 0
    # the run fixture used the same config and seed: scenes are byte-identical
    for name in stages.list_envs(run.out_dir, "seen"):
        assert (out / "envs" / name).read_bytes() == open(os.path.join(run.out_dir, "envs", name), "rb").read()
    ckpt = os.path.join(run.out_dir, "models", "mnp.ckpt")
    scene = str(out / "envs" / "seen" / "scene_0000.json")
    sc = read_scene(scene)
    net = stages.load_net(ckpt)
    a, b = stages.sample_problem(net.robot, sc, np.random.default_rng(0))
    svg = tmp_path / "p.svg"
    code = main(base + ["plan", "--scene", scene, "--checkpoint", ckpt, "--start", *map(str, a),
                        "--goal", *map(str, b), "--svg", str(svg), "--trace", str(tmp_path / "t.jsonl")])
    assert code == 0 and svg.exists()
    # endpoint in collision and a wrong-dimension config
    box = sc.obstacles[0].center
    assert main(base + ["plan", "--scene", scene, "--checkpoint", ckpt, "--start", *map(str, box),
                        "--goal", *map(str, b)]) == 3
    assert main(base + ["plan", "--scene", scene, "--checkpoint", ckpt, "--start", "1", "--goal", "2"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}')
    assert main(["--config", str(bad), "gen-envs"]) == 2
    assert main(base + ["multimodal-eval", "--mnp", ckpt, "--mse", ckpt, "--n-draws", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_cli_plan_failure_exit_3(run, tmp_path, sealed_scene):
    from mnplan.geometry import save_scene
    path = tmp_path / "sealed.json"
    save_scene(sealed_scene, path)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"plan": {"n_iter": 3, "replan_iterations": 200}}))
    ckpt = os.path.join(run.out_dir, "models", "mnp.ckpt")
    code = main(["--config", str(cfg_path), "--out-dir", str(tmp_path), "plan", "--scene", str(path),
                 "--checkpoint", ckpt, "--start", "0", "0", "--goal", "15", "15"])
    assert code == 3
