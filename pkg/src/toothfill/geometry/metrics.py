"""Surface reconstruction metrics: chamfer, Hausdorff, average surface distance."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ToothfillError
from .mesh import TriangleMesh
from .sdf import point_mesh_distance, sample_surface


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ToothfillError("point set must be (N, 3)")
    if len(a) == 0:
        raise ToothfillError("empty point set")
    return a


def chamfer_distance(a, b) -> float:
    """Symmetric mean nearest-neighbor distance (unsquared), halved."""
    a = _as_points(a)
    b = _as_points(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(0.5 * (d_ab.mean() + d_ba.mean()))


def hausdorff_distance(a, b) -> float:
    """Max of the two directed max-min distances."""
    a = _as_points(a)
    b = _as_points(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))


def average_surface_distance(pred: TriangleMesh, gt: TriangleMesh,
                             n_samples: int = 30_000, seed: int = 0) -> float:
    """Symmetric mean point-to-triangle distance between two surfaces.

    n_samples area-weighted points are drawn on each mesh (seeded) and
    measured against the other mesh exactly.
    """
    if pred.n_faces == 0 or gt.n_faces == 0:
        raise ToothfillError("empty mesh")
    rng = np.random.default_rng(seed)
    p_pts, _ = sample_surface(pred, n_samples, rng)
    g_pts, _ = sample_surface(gt, n_samples, rng)
    d_pg = point_mesh_distance(gt, p_pts)
    d_gp = point_mesh_distance(pred, g_pts)
    return float(0.5 * (d_pg.mean() + d_gp.mean()))
