"""Procedural tooth family: determinism, watertightness, cuts, contours."""

import json

import numpy as np
import pytest

from toothfill.errors import EmptyCrown, InvalidSpec
from toothfill.geometry import contour_sdf, load_obj, read_sdf_samples, signed_distance
from toothfill.geometry.mesh import cross_section_loops, is_watertight
from toothfill.geometry.primitives import icosphere
from toothfill.synthcorpus import (
    CorpusManifest,
    ToothSpec,
    build_corpus,
    cap_face_mask,
    crown_supervision_samples,
    generate_tooth,
    make_contour,
    make_partial_crown,
    random_tooth_spec,
)


def test_same_spec_bit_identical():
    spec = random_tooth_spec(seed=5)
    a = generate_tooth(spec)
    b = generate_tooth(spec)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_three_root_cross_section_loops():
    spec = random_tooth_spec(seed=1)
    while spec.root_count != 3:
        spec = random_tooth_spec(seed=spec.seed + 1)
    mesh = generate_tooth(spec)
    mid_root = float(mesh.vertices[:, 1].min()) * 0.5
    assert len(cross_section_loops(mesh, mid_root)) == 3


def test_generated_watertight_and_normalized():
    for seed in range(6):
        mesh = generate_tooth(random_tooth_spec(seed=seed))
        assert is_watertight(mesh)
        assert np.linalg.norm(mesh.vertices, axis=1).max() <= 1.0 + 1e-12


def test_invalid_spec_rejected():
    with pytest.raises(InvalidSpec):
        generate_tooth(ToothSpec(root_count=5, root_length=(1, 1, 1, 1, 1),
                                 root_radius=(1,) * 5, root_splay=(0.4,) * 5))
    with pytest.raises(InvalidSpec):
        generate_tooth(ToothSpec(crown_radius=-1.0))
    with pytest.raises(InvalidSpec):
        generate_tooth(ToothSpec(root_count=1, root_length=(0.1,),
                                 root_radius=(0.3,), root_splay=(0.0,)))


def test_partial_crown_no_cut_returns_input(sphere2):
    out = make_partial_crown(sphere2, 0.0)
    assert np.array_equal(out.vertices, sphere2.vertices)


def test_partial_crown_vertices_above_plane():
    mesh = generate_tooth(random_tooth_spec(seed=2))
    ys = mesh.vertices[:, 1]
    h = float(ys.min()) + 0.55 * float(ys.max() - ys.min())
    crown = make_partial_crown(mesh, 0.55)
    assert crown.vertices[:, 1].min() >= h - 1e-9
    assert is_watertight(crown)


def test_partial_crown_cut_above_everything(sphere2):
    with pytest.raises(EmptyCrown):
        make_partial_crown(sphere2, 1.2)


def test_sphere_cap_area():
    sphere = icosphere(4)  # radius 1
    cap = make_partial_crown(sphere, 0.5)  # cut at equator
    area = cap.face_areas().sum()
    expected = 2.0 * np.pi + np.pi  # hemisphere + disk
    assert abs(area - expected) / expected < 0.02
    assert is_watertight(cap)


def test_cap_mask_identifies_plane_faces():
    mesh = generate_tooth(random_tooth_spec(seed=3))
    crown = make_partial_crown(mesh, 0.55)
    mask = cap_face_mask(crown)
    assert mask.any() and not mask.all()
    h = crown.vertices[:, 1].min()
    cap_verts = crown.faces[mask].ravel()
    assert np.abs(crown.vertices[cap_verts, 1] - h).max() < 1e-9


def test_contour_of_sphere_is_circle(sphere3):
    poly = make_contour(sphere3, (0.0, 0.0, 1.0))
    r = np.linalg.norm(poly.vertices, axis=1)
    assert r.min() >= 0.99 and r.max() <= 1.0 + 1e-9


def test_contour_of_cube_is_square(unit_box):
    poly = make_contour(unit_box, (0.0, 0.0, 1.0))
    assert np.abs(np.abs(poly.vertices).max(axis=0) - 1.0).max() < 1e-9
    assert abs(abs(poly.signed_area()) - 4.0) < 1e-6


def test_contour_rotation_equivariance():
    mesh = generate_tooth(random_tooth_spec(seed=4))
    phi = 0.37
    rot = np.array([[np.cos(phi), -np.sin(phi), 0.0],
                    [np.sin(phi), np.cos(phi), 0.0],
                    [0.0, 0.0, 1.0]])
    from toothfill.geometry.mesh import TriangleMesh
    rotated = TriangleMesh(mesh.vertices @ rot.T, mesh.faces.copy())
    c0 = make_contour(mesh, (0.0, 0.0, 1.0))
    c1 = make_contour(rotated, (0.0, 0.0, 1.0))
    # rotating the mesh about the view axis rotates the contour
    rot2 = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    want = c0.vertices @ rot2.T
    from toothfill.geometry.metrics import hausdorff_distance
    a3 = np.concatenate([want, np.zeros((len(want), 1))], axis=1)
    b3 = np.concatenate([c1.vertices, np.zeros((len(c1.vertices), 1))], axis=1)
    assert hausdorff_distance(a3, b3) < 5e-3


def test_crown_samples_avoid_cap():
    mesh = generate_tooth(random_tooth_spec(seed=6))
    crown = make_partial_crown(mesh, 0.55)
    pts, vals = crown_supervision_samples(crown, 300, 60, 0.05, seed=9)
    h = crown.vertices[:, 1].min()
    assert pts[:, 1].min() >= h - 1e-12
    direct = np.clip(signed_distance(crown, pts), -0.1, 0.1)
    assert np.array_equal(vals, direct)


def test_build_corpus_deterministic(tmp_path):
    m1 = build_corpus(6, seed=11, out_dir=tmp_path / "a", split=(4, 1, 1), subdivisions=2)
    m2 = build_corpus(6, seed=11, out_dir=tmp_path / "b", split=(4, 1, 1), subdivisions=2)
    for r1, r2 in zip(m1.shapes, m2.shapes):
        assert r1.spec == r2.spec
        assert r1.paths == r2.paths
        b1 = open(m1.path(r1.shape_id, "full"), "rb").read()
        b2 = open(m2.path(r2.shape_id, "full"), "rb").read()
        assert b1 == b2
        s1 = open(m1.path(r1.shape_id, "full3d"), "rb").read()
        s2 = open(m2.path(r2.shape_id, "full3d"), "rb").read()
        assert s1 == s2


def test_corpus_round_trips(tmp_path):
    manifest = build_corpus(4, seed=3, out_dir=tmp_path, split=(2, 1, 1), subdivisions=2)
    again = CorpusManifest.load(tmp_path / "manifest.json")
    assert again.split == manifest.split
    for rec in again.shapes:
        mesh = load_obj(again.path(rec.shape_id, "full"))
        assert is_watertight(mesh)
        crown = load_obj(again.path(rec.shape_id, "crown"))
        assert is_watertight(crown)
        pts, vals = read_sdf_samples(again.path(rec.shape_id, "full3d"))
        assert len(pts) == len(vals) > 0
        assert np.abs(vals).max() <= 0.1 + 1e-7  # float32 rounding of the clamp
        with open(again.path(rec.shape_id, "contour"), "r", encoding="utf-8") as fh:
            ring = np.asarray(json.load(fh))
        assert ring.ndim == 2 and ring.shape[1] == 2


def test_root_count_distribution_covers_all():
    counts = {1: 0, 2: 0, 3: 0}
    for seed in range(100):
        counts[random_tooth_spec(seed=seed).root_count] += 1
    assert all(v > 0 for v in counts.values())
