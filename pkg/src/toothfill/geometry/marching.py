"""Isosurface extraction from a dense scalar grid."""

from __future__ import annotations

import numpy as np

from ..errors import ToothfillError
from .mesh import TriangleMesh
from .mc_tables import EDGE_TABLE, TRI_TABLE, EDGE_CORNERS, CORNER_OFFSETS


def marching_cubes(field: np.ndarray, iso: float = 0.0,
                   origin=(-1.0, -1.0, -1.0), spacing=None) -> TriangleMesh:
    """Triangulate the iso-level set of a scalar grid.

    field is indexed [ix, iy, iz]; grid point (i, j, k) sits at
    origin + (i, j, k) * spacing.  Vertices are interpolated linearly along
    crossed edges and welded through shared grid edges, and triangles are
    wound so normals point toward increasing field values.  A field
    entirely on one side of iso yields an empty mesh.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3 or min(field.shape) < 2:
        raise ToothfillError("field must be a 3D grid with at least 2 samples per axis")
    if not np.all(np.isfinite(field)):
        raise ToothfillError("field contains non-finite values")
    origin = np.asarray(origin, dtype=np.float64)
    if spacing is None:
        spacing = np.array([2.0 / (n - 1) for n in field.shape])
    else:
        spacing = np.broadcast_to(np.asarray(spacing, dtype=np.float64), (3,)).copy()

    inside = field < iso
    nx, ny, nz = field.shape
    # cube case index per cell, vectorized over the whole grid
    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int32)
    for c, (ox, oy, oz) in enumerate(CORNER_OFFSETS):
        case |= inside[ox:nx - 1 + ox, oy:ny - 1 + oy, oz:nz - 1 + oz].astype(np.int32) << c
    active = np.argwhere((case > 0) & (case < 255))
    if len(active) == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    verts: list[np.ndarray] = []
    vert_ids: dict[tuple[int, int, int, int, int, int], int] = {}
    faces: list[list[int]] = []

    def edge_vertex(ci, cj, ck, e) -> int:
        c0, c1 = EDGE_CORNERS[e]
        g0 = (ci + CORNER_OFFSETS[c0][0], cj + CORNER_OFFSETS[c0][1], ck + CORNER_OFFSETS[c0][2])
        g1 = (ci + CORNER_OFFSETS[c1][0], cj + CORNER_OFFSETS[c1][1], ck + CORNER_OFFSETS[c1][2])
        if g1 < g0:  # one canonical orientation per grid edge
            g0, g1 = g1, g0
        key = g0 + g1
        vid = vert_ids.get(key)
        if vid is None:
            f0 = field[g0]
            f1 = field[g1]
            t = (iso - f0) / (f1 - f0)
            p0 = origin + np.multiply(g0, spacing)
            p1 = origin + np.multiply(g1, spacing)
            vid = len(verts)
            verts.append(p0 + t * (p1 - p0))
            vert_ids[key] = vid
        return vid

    for ci, cj, ck in active:
        cube = int(case[ci, cj, ck])
        tri_row = TRI_TABLE[cube]
        local: dict[int, int] = {}
        for e in range(12):
            if EDGE_TABLE[cube] & (1 << e):
                local[e] = edge_vertex(ci, cj, ck, e)
        i = 0
        while i < 16 and tri_row[i] != -1:
            faces.append([local[int(tri_row[i])], local[int(tri_row[i + 1])], local[int(tri_row[i + 2])]])
            i += 3

    mesh = TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))
    return _orient_outward(mesh, field, iso, origin, spacing)


def _orient_outward(mesh: TriangleMesh, field, iso, origin, spacing) -> TriangleMesh:
    """Flip all windings if normals point toward decreasing field values.

    The lookup table is orientation-consistent, so one global test on the
    largest face suffices.
    """
    if mesh.n_faces == 0:
        return mesh
    areas = mesh.face_areas()
    f = int(np.argmax(areas))
    tri = mesh.vertices[mesh.faces[f]]
    center = tri.mean(axis=0)
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    normal /= np.linalg.norm(normal)
    # central-difference field gradient at the face center
    eps = spacing * 0.5
    grad = np.empty(3)
    for ax in range(3):
        step = np.zeros(3)
        step[ax] = eps[ax]
        grad[ax] = (_sample_field(field, origin, spacing, center + step)
                    - _sample_field(field, origin, spacing, center - step)) / (2.0 * eps[ax])
    if np.dot(normal, grad) < 0.0:
        mesh = TriangleMesh(mesh.vertices.copy(), mesh.faces[:, ::-1].copy())
    return mesh


def _sample_field(field, origin, spacing, point) -> float:
    """Trilinear interpolation with edge clamping."""
    g = (np.asarray(point) - origin) / spacing
    g = np.clip(g, 0, np.array(field.shape) - 1.000001)
    i0 = np.floor(g).astype(int)
    frac = g - i0
    val = 0.0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                w = ((frac[0] if dx else 1 - frac[0])
                     * (frac[1] if dy else 1 - frac[1])
                     * (frac[2] if dz else 1 - frac[2]))
                val += w * field[i0[0] + dx, i0[1] + dy, i0[2] + dz]
    return val
