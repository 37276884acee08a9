"""Test-time completion: latent projection, mesh extraction, refinement."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import EmptyShape, ToothfillError
from .geometry.deform import laplacian_deform
from .geometry.marching import marching_cubes
from .geometry.mesh import TriangleMesh, save_obj
from .geometry.sdf import Polygon2D, closest_point_on_mesh
from .model import Checkpoint, Discriminator, decode_grid
from .synthcorpus import cap_face_mask
from .training import LossReport, code_descent

# instrumentation for ablation wiring checks
counters = {"contour_rows": 0, "discriminate_calls": 0}


def reset_counters() -> None:
    counters["contour_rows"] = 0
    counters["discriminate_calls"] = 0


@dataclass
class StopRule:
    tau_d: float = 0.1
    patience: int = 10
    max_iters: int = 800

    def __post_init__(self):
        if not self.tau_d > 0.0:
            raise ToothfillError("tau_d must be positive")
        if self.max_iters < 1:
            raise ToothfillError("max_iters must be >= 1")


@dataclass
class CompletionJob:
    """State of one completion: inputs, code, and optimization telemetry."""

    crown_mesh: TriangleMesh | None
    partial_points: np.ndarray
    partial_values: np.ndarray
    contour: Polygon2D | None = None
    contour_points: np.ndarray | None = None
    contour_values: np.ndarray | None = None
    seed: int = 0
    code: np.ndarray | None = None
    history: list = field(default_factory=list)        # LossReport per iteration
    disc_history: list = field(default_factory=list)   # discriminator BCE per iteration
    stop_reason: str | None = None

    @property
    def iterations(self) -> int:
        return len(self.history)


def project_to_latent(ckpt: Checkpoint, disc: Discriminator | None,
                      job: CompletionJob, rule: StopRule, lr: float = 5e-3,
                      lam: float = 1e-4, adv_weight: float = 1.0,
                      use_2d: bool = True, use_adv: bool = True,
                      rows_per_iter: int = 256) -> np.ndarray:
    """Optimize a fresh code against the partial crown and contour samples.

    Decoder and discriminator parameters are read-only here.  With the
    adversarial term active, iteration stops once the discriminator's
    cross-entropy against the positive label stays below rule.tau_d for
    rule.patience consecutive iterations; otherwise at rule.max_iters.
    """
    contour2d = None
    if use_2d:
        if job.contour_points is None or job.contour_values is None:
            raise ToothfillError("job has no contour samples but use_2d is set")
        contour2d = (job.contour_points, job.contour_values)
    active_disc = disc if (use_adv and disc is not None) else None
    if use_adv and active_disc is None:
        raise ToothfillError("use_adv requires a discriminator")

    code, history, stop_reason = code_descent(
        ckpt.model, (job.partial_points, job.partial_values), contour2d,
        iters=rule.max_iters, lr=lr, lam=lam, seed=job.seed,
        rows_per_iter=rows_per_iter, disc=active_disc, adv_weight=adv_weight,
        tau_d=rule.tau_d if active_disc is not None else None,
        patience=rule.patience, counters=counters)

    job.code = code
    job.history = [rep for rep, _ in history]
    job.disc_history = [dl for _, dl in history]
    job.stop_reason = stop_reason
    return code


def extract_completed_mesh(ckpt: Checkpoint, code: np.ndarray, resolution: int = 64,
                           bound: float = 1.1) -> TriangleMesh:
    """Evaluate the 3D head on a grid over [-bound, bound]^3 and triangulate
    the zero set."""
    if resolution < 8:
        raise ToothfillError("resolution must be >= 8")
    g = np.linspace(-bound, bound, resolution)
    xs, ys, zs = np.meshgrid(g, g, g, indexing="ij")
    pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    field_vals = decode_grid(ckpt.model, code, pts).reshape(resolution, resolution, resolution)
    mesh = marching_cubes(field_vals, 0.0, origin=(-bound, -bound, -bound),
                          spacing=(2.0 * bound / (resolution - 1),) * 3)
    if mesh.n_faces == 0:
        raise EmptyShape("decoded field has no zero crossing")
    return mesh


def _open_boundary_segments(mesh: TriangleMesh) -> np.ndarray:
    """(E, 2, 3) endpoints of edges used by exactly one face."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            counts[key] = counts.get(key, 0) + 1
    edges = [k for k, n in counts.items() if n == 1]
    if not edges:
        return np.empty((0, 2, 3))
    return mesh.vertices[np.asarray(edges, dtype=np.int64)]


def _distance_to_segments(points: np.ndarray, segs: np.ndarray) -> np.ndarray:
    if len(segs) == 0:
        return np.full(len(points), np.inf)
    a = segs[:, 0]
    d = segs[:, 1] - segs[:, 0]
    dd = (d * d).sum(axis=1)
    ap = points[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(np.nan_to_num((ap * d[None, :, :]).sum(axis=2) / dd[None, :]), 0.0, 1.0)
    c = a[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.sqrt(((points[:, None, :] - c) ** 2).sum(axis=2)).min(axis=1)


def post_deform(pred: TriangleMesh, crown: TriangleMesh, match_radius: float = 0.02,
                anchor_weight: float = 10.0, iterations: int = 4):
    """Pull predicted vertices onto the observed crown surface.

    Each round re-matches: every predicted vertex whose nearest non-cap
    crown point lies within match_radius becomes a soft handle targeting
    that point, and the Laplacian system is solved.  Re-matching is what
    lets the crown region follow tangential offsets (a single

    nearest-point pass cannot see them).  Matches landing on the open
    boundary of the observed surface (the cut ring) are discarded - those
    vertices belong to the unobserved root side.  Returns (deformed mesh,
    handle count of the last round); zero handles returns the input
    unchanged.
    """
    mask = ~cap_face_mask(crown)
    if not mask.any():
        raise ToothfillError("crown mesh is all cap")
    wall = TriangleMesh(crown.vertices.copy(), crown.faces[mask].copy())
    boundary = _open_boundary_segments(wall)

    current = pred
    n_handles = 0
    for _ in range(max(1, iterations)):
        dists, closest = closest_point_on_mesh(wall, current.vertices)
        sel = np.nonzero(dists <= match_radius)[0]
        if len(sel):
            rim = _distance_to_segments(closest[sel], boundary)
            sel = sel[rim > 1e-7]
        if len(sel) == 0:
            if current is pred:
                return pred.copy(), 0
            break
        n_handles = len(sel)
        handles = [(int(i), closest[i]) for i in sel]
        # components without any match (e.g. spurious floaters far from the
        # crown) are pinned at one vertex so the solve stays determined and
        # they simply keep their shape and place
        for vid in _unconstrained_component_pins(pred, sel):
            handles.append((vid, pred.vertices[vid]))
        # matches come from the moved positions, but the solve always
        # preserves the original prediction's differential coordinates
        current = laplacian_deform(pred, handles, anchor_weight=anchor_weight)
    return current, n_handles


def _unconstrained_component_pins(mesh: TriangleMesh, handled: np.ndarray) -> list[int]:
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components
    n = mesh.n_vertices
    f = mesh.faces
    ii = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    jj = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    graph = sp.coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp == 1:
        return []
    have = set(labels[handled].tolist())
    pins = []
    for comp in range(n_comp):
        if comp not in have:
            pins.append(int(np.nonzero(labels == comp)[0][0]))
    return pins


def crown_fit_distance(pred: TriangleMesh, crown: TriangleMesh,
                       n_samples: int = 8000, seed: int = 0) -> float:
    """Mean distance from the observed (non-cap) crown surface to pred.

    The crown-region fit measure used to quantify the refinement step.
    """
    from .geometry.sdf import point_mesh_distance, sample_surface
    rng = np.random.default_rng(seed)
    mask = ~cap_face_mask(crown)
    pts, _ = sample_surface(crown, n_samples, rng, face_mask=mask)
    return float(point_mesh_distance(pred, pts).mean())


def write_bundle(out_dir, job: CompletionJob, pre_deform: TriangleMesh,
                 completed: TriangleMesh, config: dict) -> None:
    """Write completed.obj, pre_deform.obj, history.csv, job.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_obj(out_dir / "completed.obj", completed)
    save_obj(out_dir / "pre_deform.obj", pre_deform)
    with open(out_dir / "history.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "l3d", "l2d", "lreg", "ladv", "disc_loss"])
        for i, (rep, dl) in enumerate(zip(job.history, job.disc_history)):
            writer.writerow([i, repr(rep.l3d), repr(rep.l2d), repr(rep.lreg),
                             repr(rep.ladv), repr(dl)])
    doc = {
        "seed": job.seed,
        "stop_reason": job.stop_reason,
        "iterations": job.iterations,
        "n_partial_samples": int(len(job.partial_points)),
        "n_contour_samples": int(0 if job.contour_points is None else len(job.contour_points)),
        "config": config,
        "code": [float(c) for c in (job.code if job.code is not None else [])],
    }
    with open(out_dir / "job.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
