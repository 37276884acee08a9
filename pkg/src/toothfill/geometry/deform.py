"""Laplacian surface editing with soft handle constraints."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from ..errors import ToothfillError, UnconstrainedComponent
from .mesh import TriangleMesh


def _uniform_laplacian(mesh: TriangleMesh) -> sp.csr_matrix:
    """L = I - D^-1 A over the vertex graph (mean-of-neighbors weights)."""
    n = mesh.n_vertices
    f = mesh.faces
    ii = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
    jj = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
    adj = sp.coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n)).tocsr()
    adj.data[:] = 1.0  # collapse duplicate edge entries
    adj.sum_duplicates()
    adj.data[:] = 1.0
    deg = np.asarray(adj.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise ToothfillError("isolated vertex in mesh")
    dinv = sp.diags(1.0 / deg)
    return (sp.identity(n) - dinv @ adj).tocsr()


def laplacian_deform(mesh: TriangleMesh, handles, anchor_weight: float) -> TriangleMesh:
    """Deform so handle vertices approach their targets, preserving
    uniform Laplacian coordinates in least squares.

    handles: iterable of (vertex index, target 3D point).  anchor_weight
    scales the soft constraint rows.  Connectivity is unchanged.
    """
    if anchor_weight <= 0.0:
        raise ToothfillError("anchor_weight must be positive")
    handle_idx = []
    handle_tgt = []
    for vid, tgt in handles:
        vid = int(vid)
        if not 0 <= vid < mesh.n_vertices:
            raise ToothfillError(f"handle index {vid} out of range")
        handle_idx.append(vid)
        handle_tgt.append(np.asarray(tgt, dtype=np.float64))
    if not handle_idx:
        raise ToothfillError("no handles given")
    handle_idx = np.asarray(handle_idx, dtype=np.int64)
    handle_tgt = np.asarray(handle_tgt, dtype=np.float64)

    n = mesh.n_vertices
    lap = _uniform_laplacian(mesh)

    # every connected component needs at least one handle
    f = mesh.faces
    ii = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    jj = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    graph = sp.coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp > 1:
        constrained = set(labels[handle_idx].tolist())
        missing = [c for c in range(n_comp) if c not in constrained]
        if missing:
            raise UnconstrainedComponent(
                f"{len(missing)} mesh component(s) have no deformation handle")

    delta = lap @ mesh.vertices  # differential coordinates to preserve

    w = float(anchor_weight)
    sel = sp.coo_matrix((np.full(len(handle_idx), w),
                         (np.arange(len(handle_idx)), handle_idx)), shape=(len(handle_idx), n))
    a_mat = sp.vstack([lap, sel]).tocsr()
    rhs = np.vstack([delta, w * handle_tgt])

    normal = (a_mat.T @ a_mat).tocsc()
    moved = spsolve(normal, a_mat.T @ rhs)
    if moved.ndim == 1:
        moved = moved.reshape(n, 3)
    return TriangleMesh(np.asarray(moved), mesh.faces.copy())
