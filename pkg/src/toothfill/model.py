"""Conditioned auto-decoder, code discriminator, and checkpoint I/O.

One decoder evaluation consumes [code (256) | 3D query (3) | 2D query (2)]
through a shared backbone, then two heads emit the 3D and 2D signed
distances.  Both heads end in tanh scaled by the clamp radius, so outputs
always stay inside the supervised range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import CorruptCheckpoint, IncompatibleCheckpoint, ToothfillError
from .neural import (
    DenseLayer,
    GradientTape,
    backward,
    backward_input_only,
    forward,
    init_dense_stack,
)


@dataclass
class ModelConfig:
    code_dim: int = 256
    hidden: int = 512
    backbone_layers: int = 7
    branch3d_layers: int = 7
    branch2d_layers: int = 5
    disc_layers: int = 5
    disc_hidden: int = 256
    clamp: float = 0.1

    @property
    def input_dim(self) -> int:
        return self.code_dim + 3 + 2


@dataclass
class AutoDecoder:
    backbone: list[DenseLayer]
    branch3d: list[DenseLayer]
    branch2d: list[DenseLayer]
    config: ModelConfig

    def parameters(self) -> list[np.ndarray]:
        out = []
        for stack in (self.backbone, self.branch3d, self.branch2d):
            for layer in stack:
                out.append(layer.weights)
                out.append(layer.bias)
        return out


@dataclass
class Discriminator:
    stack: list[DenseLayer]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.stack:
            out.append(layer.weights)
            out.append(layer.bias)
        return out


def build_autodecoder(cfg: ModelConfig, rng: np.random.Generator) -> AutoDecoder:
    backbone = init_dense_stack(
        [cfg.input_dim] + [cfg.hidden] * cfg.backbone_layers,
        ["relu"] * cfg.backbone_layers, rng)
    branch3d = init_dense_stack(
        [cfg.hidden] * cfg.branch3d_layers + [1],
        ["relu"] * (cfg.branch3d_layers - 1) + ["tanh"], rng)
    branch2d = init_dense_stack(
        [cfg.hidden] * cfg.branch2d_layers + [1],
        ["relu"] * (cfg.branch2d_layers - 1) + ["tanh"], rng)
    return AutoDecoder(backbone, branch3d, branch2d, cfg)


def build_discriminator(cfg: ModelConfig, rng: np.random.Generator) -> Discriminator:
    sizes = [cfg.code_dim] + [cfg.disc_hidden] * (cfg.disc_layers - 1) + [1]
    stack = init_dense_stack(sizes, ["relu"] * (cfg.disc_layers - 1) + ["none"], rng)
    return Discriminator(stack)


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

@dataclass
class DecodeTape:
    """Tapes from one decode pass, for backpropagation through both heads."""

    backbone: GradientTape
    branch3d: GradientTape
    branch2d: GradientTape | None


def decode_batch(model: AutoDecoder, codes: np.ndarray, p3: np.ndarray,
                 p2: np.ndarray, with_2d: bool = True, rowwise: bool = False):
    """Vectorized decode.  Returns (s3, s2, tape); s2 is None if with_2d=False.

    codes (B, code_dim), p3 (B, 3), p2 (B, 2).  Outputs are scaled by the
    clamp radius, hence always in (-clamp, clamp).
    """
    x = np.concatenate([codes, p3, p2], axis=1)
    feat, tape_bb = forward(model.backbone, x, rowwise=rowwise)
    y3, tape_3d = forward(model.branch3d, feat, rowwise=rowwise)
    s3 = model.config.clamp * y3[:, 0]
    if with_2d:
        y2, tape_2d = forward(model.branch2d, feat, rowwise=rowwise)
        s2 = model.config.clamp * y2[:, 0]
    else:
        s2, tape_2d = None, None
    return s3, s2, DecodeTape(tape_bb, tape_3d, tape_2d)


def decode(model: AutoDecoder, code: np.ndarray, p3, p2):
    """Single-query decode: (s3, s2) floats."""
    z = np.asarray(code, dtype=np.float64).reshape(1, -1)
    s3, s2, _ = decode_batch(model, z,
                             np.asarray(p3, dtype=np.float64).reshape(1, 3),
                             np.asarray(p2, dtype=np.float64).reshape(1, 2))
    return float(s3[0]), float(s2[0])


def decode_backward(model: AutoDecoder, tape: DecodeTape,
                    ds3: np.ndarray, ds2: np.ndarray | None,
                    need_params: bool = True):
    """Gradients of a scalar loss through both heads.

    ds3/ds2 are per-row cotangents of the head outputs s3/s2.  Returns
    (param_grads aligned with model.parameters(), dX) where dX is the
    gradient w.r.t. the concatenated input rows.  With need_params=False
    only dX is computed (frozen-decoder mode) and param_grads is None.
    """
    delta = model.config.clamp
    cot3 = (delta * np.asarray(ds3, dtype=np.float64)).reshape(-1, 1)
    if need_params:
        g3, dfeat3 = backward(tape.branch3d, cot3)
    else:
        dfeat3 = backward_input_only(tape.branch3d, cot3)
        g3 = None
    dfeat = dfeat3
    g2 = None
    if ds2 is not None:
        if tape.branch2d is None:
            raise ToothfillError("2D cotangent given but 2D head was not evaluated")
        cot2 = (delta * np.asarray(ds2, dtype=np.float64)).reshape(-1, 1)
        if need_params:
            g2, dfeat2 = backward(tape.branch2d, cot2)
        else:
            dfeat2 = backward_input_only(tape.branch2d, cot2)
        dfeat = dfeat + dfeat2
    if need_params:
        gbb, dx = backward(tape.backbone, dfeat)
        if g2 is None:
            g2 = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.branch2d]
        flat = []
        for stack_grads in (gbb, g3, g2):
            for dw, db in stack_grads:
                flat.append(dw)
                flat.append(db)
        return flat, dx
    dx = backward_input_only(tape.backbone, dfeat)
    return None, dx


def decode_grid(model: AutoDecoder, code: np.ndarray, points3: np.ndarray,
                chunk: int = 4096) -> np.ndarray:
    """3D-head values for many spatial points under one code.

    The 2D query is pinned to (0, 0); the 2D head is not evaluated.
    """
    code = np.asarray(code, dtype=np.float64).ravel()
    pts = np.asarray(points3, dtype=np.float64)
    out = np.empty(len(pts))
    p2 = np.zeros((1, 2))
    for lo in range(0, len(pts), chunk):
        n = len(pts[lo:lo + chunk])
        codes = np.broadcast_to(code, (n, code.size))
        p2b = np.broadcast_to(p2, (n, 2))
        s3, _, _ = decode_batch(model, codes, pts[lo:lo + chunk], p2b, with_2d=False)
        out[lo:lo + n] = s3
    return out


# ---------------------------------------------------------------------------
# discriminator
# ---------------------------------------------------------------------------

def discriminate(disc: Discriminator, code: np.ndarray) -> float | np.ndarray:
    """Probability that a code encodes a full (uncut) shape."""
    z = np.asarray(code, dtype=np.float64)
    single = z.ndim == 1
    logits, _ = forward(disc.stack, z.reshape(-1, z.shape[-1]))
    prob = 1.0 / (1.0 + np.exp(-logits[:, 0]))
    return float(prob[0]) if single else prob


def discriminator_forward(disc: Discriminator, codes: np.ndarray):
    """(logits, tape) for training or code-gradient evaluation."""
    logits, tape = forward(disc.stack, codes)
    return logits[:, 0], tape


def discriminator_backward(disc: Discriminator, tape: GradientTape,
                           dlogit: np.ndarray, need_params: bool = True):
    cot = np.asarray(dlogit, dtype=np.float64).reshape(-1, 1)
    if need_params:
        grads, dz = backward(tape, cot)
        flat = []
        for dw, db in grads:
            flat.append(dw)
            flat.append(db)
        return flat, dz
    return None, backward_input_only(tape, cot)


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"TINP"
_CKPT_VERSION = 1


@dataclass
class Checkpoint:
    model: AutoDecoder
    discriminator: Discriminator
    codebook: dict[str, np.ndarray]
    config: ModelConfig
    train_config: dict = field(default_factory=dict)
    seed: int = 0
    history: list = field(default_factory=list, repr=False, compare=False)  # not persisted

    def codes_matrix(self) -> np.ndarray:
        return np.stack([self.codebook[k] for k in sorted(self.codebook)], axis=0)


def _stack_manifest(prefix: str, stack: list[DenseLayer]):
    entries = []
    tensors = []
    for i, layer in enumerate(stack):
        entries.append({"name": f"{prefix}.{i}.weights", "shape": list(layer.weights.shape),
                        "activation": layer.activation})
        tensors.append(layer.weights)
        entries.append({"name": f"{prefix}.{i}.bias", "shape": list(layer.bias.shape)})
        tensors.append(layer.bias)
    return entries, tensors


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    entries = []
    tensors = []
    for prefix, stack in (("backbone", ckpt.model.backbone),
                          ("branch3d", ckpt.model.branch3d),
                          ("branch2d", ckpt.model.branch2d),
                          ("disc", ckpt.discriminator.stack)):
        e, t = _stack_manifest(prefix, stack)
        entries += e
        tensors += t
    code_ids = sorted(ckpt.codebook)
    for cid in code_ids:
        entries.append({"name": f"code.{cid}", "shape": list(ckpt.codebook[cid].shape)})
        tensors.append(ckpt.codebook[cid])

    manifest = {
        "version": _CKPT_VERSION,
        "seed": ckpt.seed,
        "config": asdict(ckpt.config),
        "train_config": ckpt.train_config,
        "code_ids": code_ids,
        "tensors": entries,
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(np.array(_CKPT_VERSION, dtype="<u4").tobytes())
        fh.write(np.array(len(blob), dtype="<u8").tobytes())
        fh.write(blob)
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptCheckpoint(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CKPT_MAGIC:
            raise CorruptCheckpoint(f"bad magic {magic!r}")
        version = int(np.frombuffer(_read_exact(fh, 4, "version"), dtype="<u4")[0])
        if version != _CKPT_VERSION:
            raise IncompatibleCheckpoint(f"checkpoint version {version}, expected {_CKPT_VERSION}")
        mlen = int(np.frombuffer(_read_exact(fh, 8, "manifest length"), dtype="<u8")[0])
        try:
            manifest = json.loads(_read_exact(fh, mlen, "manifest").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptCheckpoint(f"unreadable manifest: {exc}") from exc
        tensors = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 8 * count, entry["name"])
            tensors[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        extra = fh.read(1)
        if extra:
            raise CorruptCheckpoint("trailing bytes after tensor payload")

    cfg = ModelConfig(**manifest["config"])

    def rebuild(prefix: str, acts_default: str) -> list[DenseLayer]:
        stack = []
        i = 0
        while f"{prefix}.{i}.weights" in tensors:
            entry = next(e for e in manifest["tensors"] if e["name"] == f"{prefix}.{i}.weights")
            stack.append(DenseLayer(tensors[f"{prefix}.{i}.weights"],
                                    tensors[f"{prefix}.{i}.bias"],
                                    entry.get("activation", acts_default)))
            i += 1
        return stack

    model = AutoDecoder(rebuild("backbone", "relu"), rebuild("branch3d", "relu"),
                        rebuild("branch2d", "relu"), cfg)
    disc = Discriminator(rebuild("disc", "relu"))
    codebook = {cid: tensors[f"code.{cid}"] for cid in manifest["code_ids"]}
    return Checkpoint(model=model, discriminator=disc, codebook=codebook, config=cfg,
                      train_config=manifest.get("train_config", {}),
                      seed=int(manifest.get("seed", 0)))
