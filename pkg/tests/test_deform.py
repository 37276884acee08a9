"""Laplacian editing: identity, rigid motion, independent dense solve."""

import numpy as np
import pytest

from toothfill.errors import UnconstrainedComponent
from toothfill.geometry import laplacian_deform
from toothfill.geometry.mesh import TriangleMesh
from toothfill.geometry.primitives import icosphere


def uniform_laplacian_dense(mesh):
    n = mesh.n_vertices
    adj = np.zeros((n, n))
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            adj[u, v] = 1.0
            adj[v, u] = 1.0
    deg = adj.sum(axis=1)
    return np.eye(n) - adj / deg[:, None]


def test_identity_when_handles_at_current_positions(sphere2):
    handles = [(i, sphere2.vertices[i]) for i in range(0, sphere2.n_vertices, 10)]
    out = laplacian_deform(sphere2, handles, anchor_weight=10.0)
    assert np.abs(out.vertices - sphere2.vertices).max() < 1e-6
    assert np.array_equal(out.faces, sphere2.faces)


def test_all_handles_rigid_translation(sphere2):
    shift = np.array([1.0, 0.0, 0.0])
    handles = [(i, sphere2.vertices[i] + shift) for i in range(sphere2.n_vertices)]
    out = laplacian_deform(sphere2, handles, anchor_weight=5.0)
    assert np.abs(out.vertices - (sphere2.vertices + shift)).max() < 1e-6


def test_partial_pull_matches_dense_solver():
    mesh = icosphere(1)  # small: dense reference is cheap
    rng = np.random.default_rng(4)
    idx = rng.choice(mesh.n_vertices, mesh.n_vertices // 10, replace=False)
    targets = mesh.vertices[idx] * 1.1
    w = 10.0
    out = laplacian_deform(mesh, list(zip(idx, targets)), anchor_weight=w)

    lap = uniform_laplacian_dense(mesh)
    sel = np.zeros((len(idx), mesh.n_vertices))
    sel[np.arange(len(idx)), idx] = w
    a_mat = np.vstack([lap, sel])
    rhs = np.vstack([lap @ mesh.vertices, w * targets])
    ref, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    assert np.abs(out.vertices - ref).max() < 1e-8


def test_pulled_handles_reach_targets(sphere2):
    rng = np.random.default_rng(7)
    idx = rng.choice(sphere2.n_vertices, sphere2.n_vertices // 10, replace=False)
    targets = sphere2.vertices[idx] * 1.1  # outward by 10%
    out = laplacian_deform(sphere2, list(zip(idx, targets)), anchor_weight=10.0)
    err = np.linalg.norm(out.vertices[idx] - targets, axis=1)
    assert err.max() < 0.01

    # free vertices stay smooth: residual does not blow up
    lap = uniform_laplacian_dense(sphere2)
    res_before = np.linalg.norm(lap @ sphere2.vertices)
    res_after = np.linalg.norm(lap @ out.vertices - lap @ sphere2.vertices) + res_before
    assert np.linalg.norm(lap @ out.vertices) < res_before * 1.5


def test_unconstrained_component_rejected(sphere2, unit_box):
    # two disjoint components, handles only on the first
    n = sphere2.n_vertices
    verts = np.vstack([sphere2.vertices, unit_box.vertices + 5.0])
    faces = np.vstack([sphere2.faces, unit_box.faces + n])
    mesh = TriangleMesh(verts, faces)
    with pytest.raises(UnconstrainedComponent):
        laplacian_deform(mesh, [(0, verts[0])], anchor_weight=1.0)


def test_connectivity_preserved(sphere2):
    out = laplacian_deform(sphere2, [(0, sphere2.vertices[0] + 0.1)], anchor_weight=1.0)
    assert np.array_equal(out.faces, sphere2.faces)
