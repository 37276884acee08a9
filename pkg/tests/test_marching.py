"""Isosurface extraction on analytic fields."""

import numpy as np
import pytest

from toothfill.errors import ToothfillError
from toothfill.geometry import marching_cubes
from toothfill.geometry.mesh import is_watertight


def sphere_field(n, radius=0.5):
    g = np.linspace(-1.0, 1.0, n)
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    return np.sqrt(x * x + y * y + z * z) - radius


def test_sphere_vertices_on_level_set():
    n = 64
    mesh = marching_cubes(sphere_field(n), 0.0, origin=(-1, -1, -1))
    voxel_diag = np.sqrt(3.0) * 2.0 / (n - 1)
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 0.5).max() < 2.0 * voxel_diag
    assert mesh.n_faces > 0


def test_sphere_output_watertight():
    mesh = marching_cubes(sphere_field(48), 0.0, origin=(-1, -1, -1))
    assert is_watertight(mesh)


def test_normals_point_outward():
    mesh = marching_cubes(sphere_field(32), 0.0, origin=(-1, -1, -1))
    normals = mesh.face_normals()
    centers = mesh.triangles().mean(axis=1)
    radial = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    assert (normals * radial).sum(axis=1).min() > 0.0


def test_all_positive_field_empty():
    mesh = marching_cubes(np.ones((8, 8, 8)), 0.0)
    assert mesh.n_faces == 0 and mesh.n_vertices == 0


def test_linear_field_exact_plane():
    n = 16
    g = np.linspace(-1.0, 1.0, n)
    field = np.broadcast_to(g[None, None, :], (n, n, n)).copy()
    mesh = marching_cubes(field, 0.0, origin=(-1, -1, -1), spacing=(2 / (n - 1),) * 3)
    assert mesh.n_faces > 0
    assert np.abs(mesh.vertices[:, 2]).max() < 1e-6


def test_monotone_radial_fields_stay_within_two_diagonals():
    for n, radius in ((24, 0.4), (40, 0.7)):
        mesh = marching_cubes(sphere_field(n, radius), 0.0, origin=(-1, -1, -1))
        voxel_diag = np.sqrt(3.0) * 2.0 / (n - 1)
        r = np.linalg.norm(mesh.vertices, axis=1)
        assert np.abs(r - radius).max() < 2.0 * voxel_diag


def test_iso_offset_level():
    n = 48
    mesh = marching_cubes(sphere_field(n, 0.5), 0.2, origin=(-1, -1, -1))
    r = np.linalg.norm(mesh.vertices, axis=1)
    voxel_diag = np.sqrt(3.0) * 2.0 / (n - 1)
    assert np.abs(r - 0.7).max() < 2.0 * voxel_diag


def test_deterministic():
    f = sphere_field(20)
    a = marching_cubes(f, 0.0, origin=(-1, -1, -1))
    b = marching_cubes(f, 0.0, origin=(-1, -1, -1))
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_rejects_tiny_grid():
    with pytest.raises(ToothfillError):
        marching_cubes(np.zeros((1, 4, 4)), 0.0)


def test_rejects_non_finite():
    f = np.zeros((4, 4, 4))
    f[1, 1, 1] = np.nan
    with pytest.raises(ToothfillError):
        marching_cubes(f, 0.0)
