"""Signed-distance kernel against brute-force and analytic references."""

import numpy as np
import pytest

from toothfill.errors import OpenSurface, ToothfillError
from toothfill.geometry import (
    Polygon2D,
    contour_sdf,
    point_mesh_distance,
    sample_sdf_2d,
    sample_sdf_3d,
    signed_distance,
    winding_number,
)
from toothfill.geometry.mesh import TriangleMesh
from toothfill.geometry.primitives import icosphere

from oracles import (
    brute_force_contour_sdf,
    brute_force_signed_distance,
    brute_force_winding,
)


def test_sphere_center_is_minus_one(sphere3):
    assert abs(signed_distance(sphere3, np.zeros(3)) + 1.0) < 0.01


def test_sphere_outside_point(sphere3):
    assert abs(signed_distance(sphere3, np.array([2.0, 0.0, 0.0])) - 1.0) < 0.01


def test_vertex_query_is_exactly_zero(sphere3):
    for i in (0, 7, 101):
        assert signed_distance(sphere3, sphere3.vertices[i].copy()) == 0.0


def test_matches_brute_force_bitwise(sphere2, rng):
    pts = rng.uniform(-1.5, 1.5, (200, 3))
    fast = signed_distance(sphere2, pts)
    for p, f in zip(pts, fast):
        assert brute_force_signed_distance(sphere2, p) == f


def test_matches_brute_force_bitwise_box(unit_box, rng):
    pts = rng.uniform(-2.0, 2.0, (200, 3))
    fast = signed_distance(unit_box, pts)
    for p, f in zip(pts, fast):
        assert brute_force_signed_distance(unit_box, p) == f


def test_sign_flips_across_surface(sphere3):
    eps = 1e-3
    # face centers with outward normals
    tri = sphere3.triangles()
    centers = tri.mean(axis=1)
    normals = sphere3.face_normals()
    for i in range(0, sphere3.n_faces, 97):
        out = signed_distance(sphere3, centers[i] + eps * normals[i])
        inn = signed_distance(sphere3, centers[i] - eps * normals[i])
        assert out > 0.0 > inn


def test_winding_inside_outside(sphere2):
    w = winding_number(sphere2, np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]))
    assert abs(w[0] - 1.0) < 1e-9
    assert abs(w[1]) < 1e-9


def test_winding_matches_reference(sphere2, rng):
    pts = rng.uniform(-1.5, 1.5, (20, 3))
    w = winding_number(sphere2, pts)
    for p, wi in zip(pts, w):
        assert abs(brute_force_winding(sphere2, p) - wi) < 1e-9


def test_open_surface_rejected(sphere2):
    open_mesh = TriangleMesh(sphere2.vertices.copy(), sphere2.faces[:-1].copy())
    with pytest.raises(OpenSurface):
        signed_distance(open_mesh, np.zeros(3))


def test_sample_sdf_3d_surface_points_near_zero(sphere3):
    pts, vals = sample_sdf_3d(sphere3, n_near=200, n_uniform=0, noise_sigma=0.0, seed=3)
    assert np.abs(vals).max() < 0.01


def test_sample_sdf_3d_values_match_signed_distance(sphere2):
    pts, vals = sample_sdf_3d(sphere2, n_near=100, n_uniform=50, noise_sigma=0.05, seed=5)
    direct = np.clip(signed_distance(sphere2, pts), -0.1, 0.1)
    assert np.array_equal(vals, direct)


def test_sample_sdf_3d_deterministic(sphere2):
    a = sample_sdf_3d(sphere2, 64, 16, 0.05, seed=11)
    b = sample_sdf_3d(sphere2, 64, 16, 0.05, seed=11)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sample_sdf_3d_clamp_and_bounds(sphere2):
    pts, vals = sample_sdf_3d(sphere2, 300, 100, 0.08, seed=2)
    assert np.abs(vals).max() <= 0.1
    assert np.linalg.norm(pts, axis=1).max() <= 1.2 + 1e-12


def test_sample_sdf_3d_zero_counts(sphere2):
    pts, vals = sample_sdf_3d(sphere2, 0, 0, 0.05, seed=1)
    assert len(pts) == 0 and len(vals) == 0


def regular_polygon(n=64, radius=1.0):
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return Polygon2D(np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1))


def test_contour_sdf_circle_center():
    poly = regular_polygon(64)
    assert abs(contour_sdf(poly, np.zeros(2)) + 1.0) < 0.005


def test_contour_sdf_outside():
    poly = regular_polygon(64)
    assert abs(contour_sdf(poly, np.array([2.0, 0.0])) - 1.0) < 0.005


def test_contour_sdf_vertex_exact_zero():
    poly = regular_polygon(16)
    assert contour_sdf(poly, poly.vertices[5].copy()) == 0.0


def test_contour_sdf_matches_brute_force(rng):
    poly = regular_polygon(32)
    pts = rng.uniform(-1.5, 1.5, (100, 2))
    fast = contour_sdf(poly, pts)
    for p, f in zip(pts, fast):
        assert abs(brute_force_contour_sdf(poly.vertices, p) - f) < 1e-12


def test_polygon_rejects_clockwise():
    sq = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ToothfillError):
        Polygon2D(sq)


def test_polygon_rejects_self_intersection():
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ToothfillError):
        Polygon2D(bowtie)


def test_sample_sdf_2d_matches_contour_sdf():
    poly = regular_polygon(32, radius=0.7)
    pts, vals = sample_sdf_2d(poly, 100, 40, 0.05, seed=9)
    direct = np.clip(contour_sdf(poly, pts), -0.1, 0.1)
    assert np.array_equal(vals, direct)
    assert np.abs(pts).max() <= 1.0 + 1e-12


def test_point_mesh_distance_unsigned(sphere3):
    d = point_mesh_distance(sphere3, np.array([0.0, 0.0, 0.0]))
    assert abs(d - 1.0) < 0.01


def test_large_mesh_query_equals_dense(rng):
    # force the k-d shortcut (subdiv 4 -> 5120 faces) vs full brute force
    mesh = icosphere(4)
    pts = np.concatenate([
        rng.uniform(-1.3, 1.3, (30, 3)),
        mesh.vertices[:10] * 1.0005,
    ])
    fast = point_mesh_distance(mesh, pts)
    for p, f in zip(pts, fast):
        best = min(
            __import__("oracles").point_triangle_distance(
                p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c])
            for a, b, c in mesh.faces)
        assert best == f
