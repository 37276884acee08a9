"""Joint training of the decoder and its codebook, plus code-only descent.

The per-epoch loss is L1(3D) + L1(2D) + lam * ||z||_2 (mean over batch
rows).  Decoder parameters and codes take Adam steps at their own learning
rates.  Everything is driven by one seeded generator, so a fixed config
reproduces checkpoints bit for bit.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import DegenerateLabels, DivergedTraining, ToothfillError
from .geometry.sdf import read_sdf_samples
from .model import (
    AutoDecoder,
    Checkpoint,
    Discriminator,
    ModelConfig,
    build_autodecoder,
    build_discriminator,
    decode_backward,
    decode_batch,
    discriminator_forward,
    discriminator_backward,
)
from .neural import AdamState, adam_step

_CHUNK_ROWS = 1024  # rows per matmul: keeps the working set inside cache


@dataclass
class TrainConfig:
    epochs: int = 1000
    lr_params: float = 1e-4
    lr_codes: float = 1e-3
    lam: float = 1e-4
    batch: int = 4096
    steps_per_epoch: int = 1  # batches drawn per epoch (desk-scale epoch size)
    clamp: float = 0.1
    seed: int = 0
    hidden: int = 512
    code_dim: int = 256
    code_init_std: float = 0.01
    use_2d: bool = True
    target_l3d: float | None = None  # optional loss-threshold stop
    telemetry: str | None = None


@dataclass
class LossReport:
    l3d: float
    l2d: float
    lreg: float
    ladv: float = 0.0

    @property
    def total(self) -> float:
        return self.l3d + self.l2d + self.lreg + self.ladv

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass
class TrainingShape:
    shape_id: str
    points3d: np.ndarray
    values3d: np.ndarray
    points2d: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    values2d: np.ndarray = field(default_factory=lambda: np.empty(0))
    partial_points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    partial_values: np.ndarray = field(default_factory=lambda: np.empty(0))


def load_training_shapes(manifest, shape_ids=None, clamp: float = 0.1) -> list[TrainingShape]:
    """Read sample dumps referenced by a corpus manifest.

    Values are re-clamped after the float32 round trip so the clamp
    invariant holds exactly in float64.
    """
    ids = shape_ids if shape_ids is not None else manifest.split["train"]
    shapes = []
    for sid in ids:
        p3, v3 = read_sdf_samples(manifest.path(sid, "full3d"))
        p2, v2 = read_sdf_samples(manifest.path(sid, "full2d"))
        pp, vp = read_sdf_samples(manifest.path(sid, "partial3d"))
        shapes.append(TrainingShape(sid, p3, np.clip(v3, -clamp, clamp),
                                    p2, np.clip(v2, -clamp, clamp),
                                    pp, np.clip(vp, -clamp, clamp)))
    return shapes


def _batch_grads(model: AutoDecoder, codes_rows, p3_rows, t3_rows, p2_rows, t2_rows,
                 use_2d: bool, need_params: bool):
    """Chunked forward/backward over one batch.

    Returns (l3d, l2d, param_grads or None, dz_rows).  Losses are means
    over the batch; gradients carry the same 1/B scaling.
    """
    n = len(codes_rows)
    code_dim = codes_rows.shape[1]
    dz_rows = np.empty((n, code_dim))
    param_acc = None
    l3_sum = 0.0
    l2_sum = 0.0
    for lo in range(0, n, _CHUNK_ROWS):
        sl = slice(lo, min(n, lo + _CHUNK_ROWS))
        s3, s2, tape = decode_batch(model, codes_rows[sl], p3_rows[sl], p2_rows[sl],
                                    with_2d=use_2d)
        r3 = s3 - t3_rows[sl]
        l3_sum += float(np.abs(r3).sum())
        ds3 = np.sign(r3) / n
        ds2 = None
        if use_2d:
            r2 = s2 - t2_rows[sl]
            l2_sum += float(np.abs(r2).sum())
            ds2 = np.sign(r2) / n
        grads, dx = decode_backward(model, tape, ds3, ds2, need_params=need_params)
        dz_rows[sl] = dx[:, :code_dim]
        if need_params:
            if param_acc is None:
                param_acc = grads
            else:
                for acc, g in zip(param_acc, grads):
                    acc += g
    return l3_sum / n, (l2_sum / n if use_2d else 0.0), param_acc, dz_rows


def _reg_report_and_grad(codes_rows: np.ndarray, lam: float):
    """Mean lam*||z|| over rows and its per-row gradient."""
    norms = np.linalg.norm(codes_rows, axis=1)
    lreg = lam * float(norms.mean())
    safe = np.where(norms > 0.0, norms, 1.0)
    grad_rows = lam * codes_rows / safe[:, None] / len(codes_rows)
    return lreg, grad_rows


def train_autodecoder(shapes: list[TrainingShape], cfg: TrainConfig) -> Checkpoint:
    """Optimize decoder weights and one code per shape under the joint loss.

    Emits a LossReport per epoch (telemetry CSV when configured).  Training
    aborts with DivergedTraining, carrying the last finite-loss checkpoint,
    if the loss leaves the float range.
    """
    if not shapes:
        raise ToothfillError("no training shapes")
    rng = np.random.default_rng(cfg.seed)
    mcfg = ModelConfig(code_dim=cfg.code_dim, hidden=cfg.hidden, clamp=cfg.clamp)
    model = build_autodecoder(mcfg, rng)
    disc = build_discriminator(mcfg, rng)
    codes = cfg.code_init_std * rng.standard_normal((len(shapes), cfg.code_dim))

    params = model.parameters()
    adam_params = AdamState.for_params(params)
    adam_codes = AdamState.for_params([codes])

    rows_per_shape = max(1, cfg.batch // len(shapes))
    shape_idx_rows = np.repeat(np.arange(len(shapes)), rows_per_shape)
    n_rows = len(shape_idx_rows)

    telemetry_fh = None
    writer = None
    if cfg.telemetry:
        Path(cfg.telemetry).parent.mkdir(parents=True, exist_ok=True)
        telemetry_fh = open(cfg.telemetry, "w", newline="", encoding="utf-8")
        writer = csv.writer(telemetry_fh)
        writer.writerow(["epoch", "l3d", "l2d", "lreg", "total", "wall_seconds"])

    def snapshot() -> Checkpoint:
        snap_model = AutoDecoder(
            [type(l)(l.weights.copy(), l.bias.copy(), l.activation) for l in model.backbone],
            [type(l)(l.weights.copy(), l.bias.copy(), l.activation) for l in model.branch3d],
            [type(l)(l.weights.copy(), l.bias.copy(), l.activation) for l in model.branch2d],
            mcfg)
        snap_disc = Discriminator(
            [type(l)(l.weights.copy(), l.bias.copy(), l.activation) for l in disc.stack])
        book = {s.shape_id: codes[i].copy() for i, s in enumerate(shapes)}
        return Checkpoint(model=snap_model, discriminator=snap_disc, codebook=book,
                          config=mcfg, train_config=asdict(cfg), seed=cfg.seed)

    last_good = snapshot()
    t_start = time.perf_counter()
    history: list[LossReport] = []
    try:
        for epoch in range(cfg.epochs):
            l3_acc = l2_acc = lreg_acc = 0.0
            for _ in range(cfg.steps_per_epoch):
                p3 = np.empty((n_rows, 3))
                t3 = np.empty(n_rows)
                p2 = np.empty((n_rows, 2))
                t2 = np.empty(n_rows)
                for si, shape in enumerate(shapes):
                    sl = slice(si * rows_per_shape, (si + 1) * rows_per_shape)
                    pick3 = rng.integers(0, len(shape.points3d), rows_per_shape)
                    p3[sl] = shape.points3d[pick3]
                    t3[sl] = shape.values3d[pick3]
                    if cfg.use_2d:
                        if len(shape.points2d) == 0:
                            raise ToothfillError(f"{shape.shape_id}: no 2D samples")
                        pick2 = rng.integers(0, len(shape.points2d), rows_per_shape)
                        p2[sl] = shape.points2d[pick2]
                        t2[sl] = shape.values2d[pick2]

                codes_rows = codes[shape_idx_rows]
                l3d, l2d, grads, dz_rows = _batch_grads(
                    model, codes_rows, p3, t3, p2, t2, cfg.use_2d, need_params=True)
                lreg, reg_rows = _reg_report_and_grad(codes_rows, cfg.lam)
                l3_acc += l3d
                l2_acc += l2d
                lreg_acc += lreg
                if not np.isfinite(l3d + l2d + lreg):
                    raise DivergedTraining(
                        f"non-finite loss at epoch {epoch}", checkpoint=last_good)

                code_grad = np.zeros_like(codes)
                np.add.at(code_grad, shape_idx_rows, dz_rows + reg_rows)

                adam_step(params, grads, adam_params, cfg.lr_params)
                adam_step([codes], [code_grad], adam_codes, cfg.lr_codes)

            report = LossReport(l3d=l3_acc / cfg.steps_per_epoch,
                                l2d=l2_acc / cfg.steps_per_epoch,
                                lreg=lreg_acc / cfg.steps_per_epoch)
            history.append(report)
            if writer is not None:
                writer.writerow([epoch, repr(report.l3d), repr(report.l2d), repr(report.lreg),
                                 repr(report.total), f"{time.perf_counter() - t_start:.3f}"])
            last_good = snapshot()
            if cfg.target_l3d is not None and report.l3d < cfg.target_l3d:
                break
    finally:
        if telemetry_fh is not None:
            telemetry_fh.close()

    ckpt = snapshot()
    ckpt.history = history
    return ckpt


# ---------------------------------------------------------------------------
# code-only descent (shared by training-time negatives and test projection)
# ---------------------------------------------------------------------------

def code_descent(model: AutoDecoder, partial3d, contour2d, *, iters: int,
                 lr: float, lam: float, seed: int, code_init_std: float = 0.01,
                 rows_per_iter: int = 256, disc: Discriminator | None = None,
                 adv_weight: float = 1.0, tau_d: float | None = None,
                 patience: int = 0, counters: dict | None = None):
    """Gradient descent on a fresh code with the decoder frozen.

    partial3d = (points, values); contour2d = (points, values) or None.
    With a discriminator, the non-saturating adversarial term -log D(z) is
    added and the loop stops once the discriminator loss stays below tau_d
    for `patience` consecutive iterations.

    Returns (code, history, stop_reason) where history rows are
    (LossReport, disc_loss).
    """
    rng = np.random.default_rng(seed)
    code = code_init_std * rng.standard_normal(model.config.code_dim)
    if iters <= 0:
        return code, [], "MaxIterations"
    p3_all, t3_all = np.asarray(partial3d[0], dtype=np.float64), np.asarray(partial3d[1], dtype=np.float64)
    if len(p3_all) == 0:
        raise ToothfillError("no 3D samples to project")
    use_2d = contour2d is not None
    if use_2d:
        p2_all, t2_all = np.asarray(contour2d[0], dtype=np.float64), np.asarray(contour2d[1], dtype=np.float64)
        if len(p2_all) == 0:
            raise ToothfillError("empty contour sample list")

    adam = AdamState.for_params([code])
    history: list[tuple[LossReport, float]] = []
    stop_reason = "MaxIterations"
    streak = 0
    for it in range(iters):
        n = min(rows_per_iter, len(p3_all))
        pick3 = rng.integers(0, len(p3_all), n) if len(p3_all) > n else np.arange(n)
        p3 = p3_all[pick3]
        t3 = t3_all[pick3]
        if use_2d:
            pick2 = rng.integers(0, len(p2_all), n)
            p2 = p2_all[pick2]
            t2 = t2_all[pick2]
            if counters is not None:
                counters["contour_rows"] = counters.get("contour_rows", 0) + n
        else:
            p2 = np.zeros((n, 2))
            t2 = np.zeros(n)

        codes_rows = np.broadcast_to(code, (n, code.size))
        l3d, l2d, _, dz_rows = _batch_grads(model, codes_rows, p3, t3, p2, t2,
                                            use_2d, need_params=False)
        norm = float(np.linalg.norm(code))
        lreg = lam * norm
        grad = dz_rows.sum(axis=0) + (lam * code / norm if norm > 0.0 else 0.0)

        ladv = 0.0
        disc_loss = np.nan
        if disc is not None:
            logit, tape = discriminator_forward(disc, code.reshape(1, -1))
            prob = 1.0 / (1.0 + np.exp(-logit[0]))
            # BCE against the positive label, also the adversarial term
            ladv = float(np.log1p(np.exp(-abs(logit[0]))) + max(-logit[0], 0.0))
            disc_loss = ladv
            _, dz_adv = discriminator_backward(disc, tape, np.array([prob - 1.0]),
                                               need_params=False)
            grad = grad + adv_weight * dz_adv[0]
            if counters is not None:
                counters["discriminate_calls"] = counters.get("discriminate_calls", 0) + 1

        report = LossReport(l3d=l3d, l2d=l2d, lreg=lreg, ladv=adv_weight * ladv)
        history.append((report, disc_loss))
        if not np.isfinite(report.total):
            raise DivergedTraining(f"code descent diverged at iteration {it}")
        adam_step([code], [grad], adam, lr)

        if disc is not None and tau_d is not None:
            if disc_loss < tau_d:
                streak += 1
                if streak >= patience:
                    stop_reason = "DiscriminatorConverged"
                    break
            else:
                streak = 0
    return code, history, stop_reason


def optimize_partial_code(ckpt: Checkpoint, partial3d, contour2d=None,
                          iters: int = 400, lr: float = 5e-3, seed: int = 0,
                          lam: float = 1e-4, rows_per_iter: int = 256) -> np.ndarray:
    """Training-time projection of crown-only samples to a negative code.

    Decoder weights are left untouched; only the fresh code moves.
    """
    code, _, _ = code_descent(ckpt.model, partial3d, contour2d, iters=iters,
                              lr=lr, lam=lam, seed=seed,
                              rows_per_iter=rows_per_iter)
    return code


# ---------------------------------------------------------------------------
# discriminator training
# ---------------------------------------------------------------------------

def _bce_and_grad(logits: np.ndarray, labels: np.ndarray):
    # stable log(1 + exp(-|x|)) + max(x, 0) - label*x
    loss = float(np.mean(np.log1p(np.exp(-np.abs(logits)))
                         + np.maximum(logits, 0.0) - labels * logits))
    probs = 1.0 / (1.0 + np.exp(-logits))
    return loss, (probs - labels) / len(logits)


def train_discriminator(full_codes: np.ndarray, partial_codes: np.ndarray,
                        epochs: int = 400, lr: float = 1e-3, seed: int = 0,
                        config: ModelConfig | None = None) -> Discriminator:
    """Binary cross-entropy on full (label 1) vs partial (label 0) codes.

    Only the discriminator's own parameters move; callers keep their
    decoder and codebook as they were.
    """
    full_codes = np.atleast_2d(np.asarray(full_codes, dtype=np.float64))
    partial_codes = np.atleast_2d(np.asarray(partial_codes, dtype=np.float64))
    if len(full_codes) == 0 or len(partial_codes) == 0:
        raise DegenerateLabels("need codes from both classes")
    cfg = config or ModelConfig(code_dim=full_codes.shape[1])
    if full_codes.shape[1] != cfg.code_dim or partial_codes.shape[1] != cfg.code_dim:
        raise ToothfillError("code width does not match discriminator input")
    rng = np.random.default_rng(seed)
    disc = build_discriminator(cfg, rng)
    params = disc.parameters()
    adam = AdamState.for_params(params)

    x = np.concatenate([full_codes, partial_codes], axis=0)
    y = np.concatenate([np.ones(len(full_codes)), np.zeros(len(partial_codes))])
    for _ in range(epochs):
        logits, tape = discriminator_forward(disc, x)
        loss, dlogit = _bce_and_grad(logits, y)
        if not np.isfinite(loss):
            raise DivergedTraining("discriminator loss is non-finite")
        grads, _ = discriminator_backward(disc, tape, dlogit, need_params=True)
        adam_step(params, grads, adam, lr)
    return disc
