"""Point-cloud encoder + planning heads and their training loops.

The encoder runs a shared per-point MLP, max-pools over points and applies a
post MLP to get the latent vector ``Z``. The planning head sees
``[Z, normalize(c_t), normalize(c_goal)]`` and emits either a Gaussian
mixture over the next normalized configuration (role ``"mnp"``) or a point
prediction trained with squared error and dropout (role ``"mse_baseline"``).
Encoder and head are trained jointly; gradients flow through ``Z``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mdn
from .geometry import Scene, Workspace
from .neuralnet import MLP, Adam, load_checkpoint, maxpool_backward, maxpool_points, save_checkpoint
from .robots import RobotModel

log = logging.getLogger(__name__)

ROLES = ("mnp", "mse_baseline")


class TrainingError(RuntimeError):
    """Training produced a non-finite loss; ``batch`` holds the offending indices."""

    def __init__(self, message, batch=None, dump_path=None):
        super().__init__(message)
        self.batch = batch
        self.dump_path = dump_path


@dataclass(frozen=True)
class NetConfig:
    point_layers: tuple = (64, 128)
    post_layers: tuple = (128,)
    pnet_hidden: tuple = (512, 512, 256)
    q_mix: int = 5
    mse_dropout: float = 0.5

    def halved(self) -> "NetConfig":
        half = lambda t: tuple(max(1, v // 2) for v in t)  # noqa: E731
        return NetConfig(half(self.point_layers), half(self.post_layers), half(self.pnet_hidden),
                         self.q_mix, self.mse_dropout)

    @property
    def z_dim(self) -> int:
        return self.post_layers[-1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    val_fraction: float = 0.1


@dataclass
class Dataset:
    """Training tuples ``(c_t, c_goal, scene, c_next)`` over a list of scenes."""

    scenes: list
    scene_index: np.ndarray
    c_t: np.ndarray
    c_goal: np.ndarray
    c_next: np.ndarray
    scene_files: list = field(default_factory=list)

    def __post_init__(self):
        self.scene_index = np.asarray(self.scene_index, dtype=np.intp)
        self.c_t = np.atleast_2d(np.asarray(self.c_t, dtype=np.float64))
        self.c_goal = np.atleast_2d(np.asarray(self.c_goal, dtype=np.float64))
        self.c_next = np.atleast_2d(np.asarray(self.c_next, dtype=np.float64))
        n = len(self.scene_index)
        if not (len(self.c_t) == len(self.c_goal) == len(self.c_next) == n):
            raise ValueError("dataset columns have different lengths")
        if n and (self.scene_index.min() < 0 or self.scene_index.max() >= len(self.scenes)):
            raise ValueError("dataset references a scene that does not exist")
        if not self.scene_files:
            self.scene_files = [f"scene_{i:04d}.json" for i in range(len(self.scenes))]

    def __len__(self):
        return len(self.scene_index)


class Encoder:
    """Shared per-point MLP -> max over points -> post MLP."""

    def __init__(self, point_mlp: MLP, post_mlp: MLP):
        self.point_mlp = point_mlp
        self.post_mlp = post_mlp

    @classmethod
    def build(cls, m: int, cfg: NetConfig, rng) -> "Encoder":
        sizes = [m, *cfg.point_layers]
        point = MLP.build(sizes, "relu", rng)
        post_sizes = [cfg.point_layers[-1], *cfg.post_layers]
        acts = ["relu"] * (len(post_sizes) - 2) + ["identity"]
        post = MLP.build(post_sizes, acts, rng)
        return cls(point, post)

    @property
    def nets(self):
        return [self.point_mlp, self.post_mlp]

    @property
    def z_dim(self):
        return self.post_mlp.n_out

    def forward(self, clouds, mode="eval", rng=None):
        """``clouds`` is ``(S, n, m)`` (or a single ``(n, m)`` cloud)."""
        clouds = np.asarray(clouds, dtype=np.float64)
        single = clouds.ndim == 2
        if single:
            clouds = clouds[None]
        if clouds.shape[1] == 0:
            raise ValueError("empty point cloud")
        feats, t_point = self.point_mlp.forward(clouds, mode, rng)
        pooled, argmax = maxpool_points(feats)
        z, t_post = self.post_mlp.forward(pooled, mode, rng)
        tape = (t_point, t_post, argmax, clouds.shape[1], single)
        return (z[0] if single else z), tape

    def backward(self, tape, grad_z):
        t_point, t_post, argmax, n, single = tape
        grad_z = np.asarray(grad_z)
        if single:
            grad_z = grad_z[None]
        g_post, g_pool = self.post_mlp.backward(t_post, grad_z)
        g_feat = maxpool_backward(g_pool, argmax, n)
        g_point, _ = self.point_mlp.backward(t_point, g_feat)
        return g_point + g_post


class PlannerNet:
    """Encoder + planning head bound to a robot model's normalization."""

    def __init__(self, role: str, encoder: Encoder, head: MLP, robot: RobotModel,
                 workspace: Workspace, q_mix: int = 5, metadata: dict | None = None):
        if role not in ROLES:
            raise ValueError(f"unknown network role {role!r}")
        self.role = role
        self.encoder = encoder
        self.head = head
        self.robot = robot
        self.workspace = workspace
        self.q_mix = q_mix
        self.metadata = dict(metadata or {})
        d = robot.dim
        expect = mdn.head_size(q_mix, d) if role == "mnp" else d
        if head.n_out != expect or head.n_in != encoder.z_dim + 2 * d:
            raise ValueError("head shape does not match encoder/robot dimensions")

    @classmethod
    def build(cls, role: str, robot: RobotModel, workspace: Workspace, cfg: NetConfig, rng) -> "PlannerNet":
        d = robot.dim
        encoder = Encoder.build(workspace.dim, cfg, rng)
        if role == "mnp":
            out, dropout = mdn.head_size(cfg.q_mix, d), None
        else:
            out = d
            dropout = [cfg.mse_dropout] * len(cfg.pnet_hidden) + [0.0]
        sizes = [encoder.z_dim + 2 * d, *cfg.pnet_hidden, out]
        acts = ["relu"] * len(cfg.pnet_hidden) + ["identity"]
        head = MLP.build(sizes, acts, rng, dropout)
        return cls(role, encoder, head, robot, workspace, cfg.q_mix)

    @property
    def nets(self):
        return self.encoder.nets + [self.head]

    def parameters(self):
        return [p for n in self.nets for p in n.parameters()]

    # -- inference -------------------------------------------------------
    def encode(self, scene_or_cloud) -> np.ndarray:
        cloud = scene_or_cloud.cloud if isinstance(scene_or_cloud, Scene) else scene_or_cloud
        cloud = np.asarray(self.workspace.normalize(cloud), dtype=np.float64)
        if cloud.shape[-2] == 0:
            # relu features are >= 0, so zero is the max over no points
            return self.encoder.post_mlp.infer(np.zeros(self.encoder.point_mlp.n_out))
        feats = self.encoder.point_mlp.infer(cloud)
        return self.encoder.post_mlp.infer(feats.max(axis=-2))

    def head_input(self, z, c_t, c_goal) -> np.ndarray:
        c_t = np.atleast_2d(self.robot.normalize(c_t))
        c_goal = np.atleast_2d(self.robot.normalize(c_goal))
        z = np.atleast_2d(z)
        if len(z) == len(c_t) == len(c_goal) == 1:
            return np.concatenate([z, c_t, c_goal], axis=1)
        n = max(len(z), len(c_t), len(c_goal))
        return np.concatenate([np.broadcast_to(z, (n, z.shape[1])),
                               np.broadcast_to(c_t, (n, c_t.shape[1])),
                               np.broadcast_to(c_goal, (n, c_goal.shape[1]))], axis=1)

    def gmm(self, z, c_t, c_goal) -> mdn.GmmParams:
        """Mixture over the next configuration in normalized coordinates."""
        if self.role != "mnp":
            raise ValueError("only the mnp head produces a mixture")
        raw = self.head(self.head_input(z, c_t, c_goal))[0]
        return mdn.constrain(raw, self.q_mix, self.robot.dim)

    def gmm_batch(self, z, c_t, c_goal):
        raw = self.head(self.head_input(z, c_t, c_goal))
        return mdn.constrain_batch(raw, self.q_mix, self.robot.dim)

    def point_prediction(self, z, c_t, c_goal, n: int = 1, rng=None, dropout: bool = False) -> np.ndarray:
        """MSE head output in raw coordinates; ``dropout=True`` keeps train-mode masks on."""
        x = np.repeat(self.head_input(z, c_t, c_goal), n, axis=0)
        y, _ = self.head.forward(x, "train" if dropout else "eval", rng)
        return self.robot.clamp(self.robot.denormalize(y))

    def propose(self, z, c_t, c_goal, n: int, rng) -> np.ndarray:
        """``n`` candidate next configurations (raw, clamped into bounds)."""
        if self.role == "mnp":
            params = self.gmm(z, c_t, c_goal)
            v = mdn.sample(params, rng, size=n)
            return self.robot.clamp(self.robot.denormalize(v))
        return self.point_prediction(z, c_t, c_goal, n, rng, dropout=True)

    def predict_next(self, z, c_t, c_goal, rng) -> np.ndarray:
        return self.propose(z, c_t, c_goal, 1, rng)[0]

    # -- persistence -----------------------------------------------------
    def save(self, path, metadata: dict | None = None) -> None:
        meta = dict(self.metadata)
        meta.update(metadata or {})
        meta.update({
            "role": self.role,
            "q_mix": self.q_mix,
            "robot": {"kind": self.robot.kind, "lower": self.robot.lower.tolist(),
                      "upper": self.robot.upper.tolist(), "half_extents": list(self.robot.half_extents),
                      "link_lengths": list(self.robot.link_lengths), "delta_steer": self.robot.delta_steer},
            "workspace": {"lo": self.workspace.lo.tolist(), "hi": self.workspace.hi.tolist()},
        })
        save_checkpoint(path, {"enet_point": self.encoder.point_mlp, "enet_post": self.encoder.post_mlp,
                               "pnet": self.head}, meta)

    @classmethod
    def load(cls, path) -> "PlannerNet":
        nets, meta = load_checkpoint(path)
        r = meta["robot"]
        robot = RobotModel(r["kind"], r["lower"], r["upper"], tuple(r["half_extents"]),
                           tuple(r["link_lengths"]), r["delta_steer"])
        ws = Workspace(meta["workspace"]["lo"], meta["workspace"]["hi"])
        enc = Encoder(nets["enet_point"], nets["enet_post"])
        return cls(meta["role"], enc, nets["pnet"], robot, ws, meta["q_mix"], meta)


# -- training ------------------------------------------------------------

def _nll_loss(net, out, target):
    alpha, _, sigma = mdn.constrain_batch(out, net.q_mix, net.robot.dim)
    if not (np.allclose(alpha.sum(axis=1), 1.0, atol=1e-9) and np.all(alpha >= 0) and np.all(sigma > 0)):
        raise TrainingError("mixture constraints violated")
    return mdn.nll_loss_and_grad(out, target, net.q_mix, net.robot.dim)


def _mse_loss(net, out, target):
    diff = out - target
    return np.sum(diff * diff, axis=1), 2.0 * diff


class _Prepared:
    def __init__(self, net: PlannerNet, data: Dataset):
        self.clouds = [net.workspace.normalize(s.cloud) for s in data.scenes]
        sizes = {len(c) for c in self.clouds}
        self.stacked = np.stack(self.clouds) if len(sizes) == 1 else None
        self.ct = net.robot.normalize(data.c_t)
        self.cg = net.robot.normalize(data.c_goal)
        self.cn = net.robot.normalize(data.c_next)
        self.scene_index = data.scene_index


def _batch_forward(net, prep, idx, mode, rng):
    uniq, inv = np.unique(prep.scene_index[idx], return_inverse=True)
    if prep.stacked is not None:
        z, etape = net.encoder.forward(prep.stacked[uniq], mode, rng)
        etapes = [(etape, np.arange(len(uniq)))]
    else:
        zs, etapes = [], []
        for k, s in enumerate(uniq):
            zk, tk = net.encoder.forward(prep.clouds[s][None], mode, rng)
            zs.append(zk[0])
            etapes.append((tk, np.array([k])))
        z = np.array(zs)
    x = np.concatenate([z[inv], prep.ct[idx], prep.cg[idx]], axis=1)
    out, htape = net.head.forward(x, mode, rng)
    return out, (etapes, htape, inv, len(uniq), z.shape[1])


def _batch_backward(net, cache, g_out):
    etapes, htape, inv, n_uniq, zdim = cache
    head_grads, g_x = net.head.backward(htape, g_out)
    g_z = np.zeros((n_uniq, zdim))
    np.add.at(g_z, inv, g_x[:, :zdim])
    enc_grads = None
    for tape, rows in etapes:
        gk = net.encoder.backward(tape, g_z[rows])
        enc_grads = gk if enc_grads is None else [a + b for a, b in zip(enc_grads, gk)]
    return enc_grads + head_grads


def batch_loss_and_grads(net: PlannerNet, data: Dataset, idx, rng=None, mode="train"):
    """Mean loss over ``idx`` and gradients aligned with ``net.parameters()``."""
    prep = _Prepared(net, data)
    idx = np.asarray(idx)
    loss_fn = _nll_loss if net.role == "mnp" else _mse_loss
    out, cache = _batch_forward(net, prep, idx, mode, rng)
    losses, g = loss_fn(net, out, prep.cn[idx])
    return float(losses.mean()), _batch_backward(net, cache, g / len(idx))


def _evaluate(net, prep, idx, batch_size, loss_fn):
    total = 0.0
    for s in range(0, len(idx), batch_size):
        b = idx[s:s + batch_size]
        out, _ = _batch_forward(net, prep, b, "eval", None)
        losses, _ = loss_fn(net, out, prep.cn[b])
        total += float(losses.sum())
    return total / max(len(idx), 1)


def _dump_batch(dump_dir, epoch, batch, data):
    if dump_dir is None:
        return None
    os.makedirs(dump_dir, exist_ok=True)
    path = os.path.join(dump_dir, f"nonfinite_epoch{epoch}.npz")
    np.savez(path, indices=batch, c_t=data.c_t[batch], c_goal=data.c_goal[batch],
             c_next=data.c_next[batch], scene_index=data.scene_index[batch])
    return path


def _fit(net: PlannerNet, data: Dataset, cfg: TrainConfig, seed: int, dump_dir=None):
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(seed)
    loss_fn = _nll_loss if net.role == "mnp" else _mse_loss
    prep = _Prepared(net, data)
    perm = rng.permutation(len(data))
    n_val = int(round(cfg.val_fraction * len(data))) if len(data) >= 10 else 0
    val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    opt = Adam(net.nets, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)
    trace = []
    best_val, best_params, stale = np.inf, None, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            b = order[s:s + cfg.batch_size]
            try:
                out, cache = _batch_forward(net, prep, b, "train", rng)
                losses, g = loss_fn(net, out, prep.cn[b])
            except FloatingPointError as exc:
                path = _dump_batch(dump_dir, epoch, b, data)
                raise TrainingError(f"non-finite values in epoch {epoch}: {exc}", b, path) from None
            if not np.all(np.isfinite(losses)):
                path = _dump_batch(dump_dir, epoch, b, data)
                raise TrainingError(f"non-finite loss in epoch {epoch}", b, path)
            grads = _batch_backward(net, cache, g / len(b))
            opt.step(grads)
            total += float(losses.sum())
        train_loss = total / len(order)
        entry = {"epoch": epoch, "train": train_loss}
        if n_val:
            val = _evaluate(net, prep, val_idx, cfg.batch_size, loss_fn)
            entry["val"] = val
            if val < best_val - 1e-12:
                best_val, stale = val, 0
                best_params = [p.copy() for p in net.parameters()]
            else:
                stale += 1
        trace.append(entry)
        log.debug("%s epoch %d train %.5f val %s", net.role, epoch, train_loss, entry.get("val"))
        if n_val and stale >= cfg.patience:
            break
    if best_params is not None:
        for p, b in zip(net.parameters(), best_params):
            p[...] = b
        for n in net.nets:
            n.version += 1
    net.metadata["loss_trace"] = trace
    net.metadata["train_config"] = asdict(cfg)
    net.metadata["seed"] = int(seed)
    return trace


def train_mnp(data: Dataset, robot: RobotModel, net_cfg: NetConfig = NetConfig(),
              train_cfg: TrainConfig = TrainConfig(), seed: int = 0, dump_dir=None):
    """Jointly train encoder + mixture head on the NLL. Returns ``(net, loss_trace)``."""
    ws = data.scenes[0].workspace
    net = PlannerNet.build("mnp", robot, ws, net_cfg, np.random.default_rng([seed, 1]))
    net.metadata["net_config"] = asdict(net_cfg)
    trace = _fit(net, data, train_cfg, seed, dump_dir)
    return net, trace


def train_mse_baseline(data: Dataset, robot: RobotModel, net_cfg: NetConfig = NetConfig(),
                       train_cfg: TrainConfig = TrainConfig(), seed: int = 0, dump_dir=None):
    """Same encoder, point-prediction head with dropout, squared-error loss."""
    ws = data.scenes[0].workspace
    net = PlannerNet.build("mse_baseline", robot, ws, net_cfg, np.random.default_rng([seed, 2]))
    net.metadata["net_config"] = asdict(net_cfg)
    trace = _fit(net, data, train_cfg, seed, dump_dir)
    return net, trace


# -- dataset file --------------------------------------------------------

def _vec(v):
    return " ".join("%.17g" % x for x in v)


def write_dataset(path, data: Dataset, header: str | None = None) -> None:
    """One record per line: ``scene_file<TAB>c_t<TAB>c_goal<TAB>c_next``;
    optional ``#``-prefixed header line."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header is not None:
            f.write("# " + header.replace("\n", " ") + "\n")
        for i in range(len(data)):
            f.write("%s\t%s\t%s\t%s\n" % (data.scene_files[data.scene_index[i]], _vec(data.c_t[i]),
                                          _vec(data.c_goal[i]), _vec(data.c_next[i])))


def read_dataset(path, load_scene_file):
    """Parse a dataset file; ``load_scene_file(name)`` resolves scene references."""
    files, index, ct, cg, cn = [], [], [], [], []
    lookup = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            name, a, b, c = line.rstrip("\n").split("\t")
            if name not in lookup:
                lookup[name] = len(files)
                files.append(name)
            index.append(lookup[name])
            ct.append([float(x) for x in a.split()])
            cg.append([float(x) for x in b.split()])
            cn.append([float(x) for x in c.split()])
    scenes = [load_scene_file(name) for name in files]
    return Dataset(scenes, np.array(index, dtype=np.intp), np.array(ct), np.array(cg), np.array(cn), files)
