"""Small feed-forward network toolkit with tape-based reverse mode.

Everything is float64. An :class:`MLP` is a chain of :class:`Dense` layers;
``forward`` returns the output together with a :class:`Tape` holding the
intermediates that ``backward`` consumes. Dropout is inverted (train-mode
masks are divided by the keep probability), so eval mode is a plain pass.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity", "softmax", "elu")

CHECKPOINT_MAGIC = b"MNPC"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, corrupted or wrong-version checkpoint file."""


class StaleTapeError(RuntimeError):
    """Backward was called with a tape recorded before a parameter update."""


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z
    if name == "elu":
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    if name == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, z, y, g):
    if name == "relu":
        return g * (z > 0)
    if name == "identity":
        return g
    if name == "elu":
        return g * np.where(z > 0, 1.0, y + 1.0)
    if name == "softmax":
        return y * (g - np.sum(g * y, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("dense layer shapes are inconsistent")

    @property
    def n_in(self):
        return self.weight.shape[1]

    @property
    def n_out(self):
        return self.weight.shape[0]


@dataclass
class Tape:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    act: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    version: int = 0
    owner: int = 0


class MLP:
    """Chain of dense layers; ``dropout[i]`` is applied after layer ``i``'s activation."""

    def __init__(self, layers, dropout=None):
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("an MLP needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer shapes do not chain: {a.n_out} -> {b.n_in}")
        self.dropout = list(dropout) if dropout is not None else [0.0] * len(self.layers)
        if len(self.dropout) != len(self.layers) or any(not 0.0 <= p < 1.0 for p in self.dropout):
            raise ValueError("dropout must give one rate in [0, 1) per layer")
        self.version = 0

    @classmethod
    def build(cls, sizes, activations, rng, dropout=None) -> "MLP":
        """Uniform fan-in scaled (Kaiming-style) initialization from ``rng``."""
        if isinstance(activations, str):
            activations = [activations] * (len(sizes) - 1)
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            bound = np.sqrt(6.0 / n_in) if act in ("relu", "elu") else np.sqrt(3.0 / n_in)
            w = rng.uniform(-bound, bound, size=(n_out, n_in))
            b = rng.uniform(-1.0 / np.sqrt(n_in), 1.0 / np.sqrt(n_in), size=n_out)
            layers.append(Dense(w, b, act))
        return cls(layers, dropout)

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out

    def descriptor(self) -> dict:
        return {
            "sizes": [self.layers[0].n_in] + [l.n_out for l in self.layers],
            "activations": [l.activation for l in self.layers],
            "dropout": list(self.dropout),
        }

    def parameters(self) -> list:
        out = []
        for l in self.layers:
            out.append(l.weight)
            out.append(l.bias)
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x, mode: str = "eval", rng=None):
        """Run the chain on ``x`` of shape ``(..., n_in)``; returns ``(y, tape)``."""
        if mode not in ("train", "eval"):
            raise ValueError("mode must be 'train' or 'eval'")
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.n_in}")
        tape = Tape(version=self.version, owner=id(self))
        h = x
        for layer, p in zip(self.layers, self.dropout):
            tape.inputs.append(h)
            z = h @ layer.weight.T + layer.bias
            y = _activate(layer.activation, z)
            tape.act.append(y)
            mask = None
            if mode == "train" and p > 0.0:
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                mask = (rng.random(y.shape) >= p) / (1.0 - p)
                y = y * mask
            tape.pre.append(z)
            tape.masks.append(mask)
            h = y
        return h, tape

    def infer(self, x):
        """Eval-mode output without recording a tape; same arithmetic as ``forward``."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.n_in:
            raise ValueError(f"input has {h.shape[-1]} features, network expects {self.n_in}")
        for layer in self.layers:
            h = _activate(layer.activation, h @ layer.weight.T + layer.bias)
        return h

    def __call__(self, x):
        return self.infer(x)

    def backward(self, tape: Tape, grad_out):
        """Reverse pass. Returns ``(param_grads, grad_input)`` where
        ``param_grads`` is aligned with :meth:`parameters`."""
        if tape.owner != id(self) or tape.version != self.version:
            raise StaleTapeError("tape does not match the current parameters")
        g = np.asarray(grad_out, dtype=np.float64)
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if tape.masks[i] is not None:
                g = g * tape.masks[i]
            gz = _activation_grad(layer.activation, tape.pre[i], tape.act[i], g)
            x = tape.inputs[i]
            gz2 = gz.reshape(-1, gz.shape[-1])
            x2 = x.reshape(-1, x.shape[-1])
            grads[2 * i] = gz2.T @ x2
            grads[2 * i + 1] = gz2.sum(axis=0)
            g = gz @ layer.weight
        return grads, g


def maxpool_points(features):
    """Max over the point axis (second to last). Returns ``(pooled, argmax)``;
    ties resolve to the lowest index."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim < 2 or features.shape[-2] == 0:
        raise ValueError("maxpool needs at least one point")
    idx = np.argmax(features, axis=-2)
    pooled = np.take_along_axis(features, idx[..., None, :], axis=-2)[..., 0, :]
    return pooled, idx


def maxpool_backward(grad_pooled, argmax, n_points):
    """Route pooled gradients back to the argmax rows only."""
    grad_pooled = np.asarray(grad_pooled)
    shape = grad_pooled.shape[:-1] + (n_points, grad_pooled.shape[-1])
    out = np.zeros(shape)
    np.put_along_axis(out, argmax[..., None, :], grad_pooled[..., None, :], axis=-2)
    return out


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **hyper)


def adam_step(params, grads, state: AdamState) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must align")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to adam_step")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class Adam:
    """Adam over a set of MLPs; bumps their versions so old tapes go stale."""

    def __init__(self, nets, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.nets = list(nets)
        self.params = [p for n in self.nets for p in n.parameters()]
        self.state = AdamState.zeros_like(self.params, lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self, grads) -> None:
        adam_step(self.params, grads, self.state)
        for n in self.nets:
            n.version += 1


# -- checkpoints ---------------------------------------------------------

def _mlp_from_descriptor(desc, values, offset):
    sizes = desc["sizes"]
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], desc["activations"]):
        w = values[offset:offset + n_in * n_out].reshape(n_out, n_in).copy()
        offset += n_in * n_out
        b = values[offset:offset + n_out].copy()
        offset += n_out
        layers.append(Dense(w, b, act))
    return MLP(layers, desc["dropout"]), offset


def save_checkpoint(path, networks: dict, metadata: dict) -> None:
    """Write named MLPs plus JSON metadata.

    Layout (little endian): ``b"MNPC"``, u32 version, u32 header length,
    u32 CRC32 of header+payload, UTF-8 JSON header, then float64 values of
    every network's parameters in layer order.
    """
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(networks, metadata))


def checkpoint_bytes(networks: dict, metadata: dict) -> bytes:
    names = list(networks)
    header = {
        "networks": [[name, networks[name].descriptor()] for name in names],
        "metadata": metadata,
    }
    values = [p.ravel() for name in names for p in networks[name].parameters()]
    payload = np.concatenate(values).astype("<f8").tobytes() if values else b""
    header["n_values"] = len(payload) // 8
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    crc = zlib.crc32(hbytes + payload) & 0xFFFFFFFF
    return CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, len(hbytes), crc) + hbytes + payload


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`: returns ``(networks, metadata)``."""
    with open(path, "rb") as f:
        return parse_checkpoint(f.read())


def parse_checkpoint(blob: bytes):
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic or too short)")
    version, hlen, crc = struct.unpack("<III", blob[4:16])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    body = blob[16:]
    if len(body) < hlen:
        raise CheckpointError("checkpoint truncated inside header")
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError("checkpoint checksum mismatch")
    try:
        header = json.loads(body[:hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    payload = body[hlen:]
    if len(payload) != 8 * header["n_values"]:
        raise CheckpointError("checkpoint payload length does not match header")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    networks = {}
    offset = 0
    for name, desc in header["networks"]:
        networks[name], offset = _mlp_from_descriptor(desc, values, offset)
    return networks, header["metadata"]
