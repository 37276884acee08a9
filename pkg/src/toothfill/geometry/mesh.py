"""Indexed triangle meshes: loading, validation, normalization, sections."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ToothfillError


@dataclass
class TriangleMesh:
    """Indexed triangle surface.

    vertices: (V, 3) float64, faces: (F, 3) int64.  Faces are oriented
    counter-clockwise seen from outside when the mesh is used as signed
    ground truth.
    """

    vertices: np.ndarray
    faces: np.ndarray
    _watertight: bool | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ToothfillError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ToothfillError("faces must be (F, 3)")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ToothfillError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_normals(self, normalized: bool = True) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        if normalized:
            lens = np.linalg.norm(n, axis=1, keepdims=True)
            lens[lens == 0.0] = 1.0
            n = n / lens
        return n

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(n, axis=1)

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.copy(), self.faces.copy())


@dataclass
class NormalizationTransform:
    """Center-then-uniform-scale map into the unit ball."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.scale = float(self.scale)
        if not self.scale > 0.0:
            raise ToothfillError("scale must be positive")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center


def _reject_degenerate(mesh: TriangleMesh) -> None:
    tri = mesh.triangles()
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas2 = np.einsum("ij,ij->i", n, n)
    if np.any(areas2 == 0.0):
        bad = int(np.nonzero(areas2 == 0.0)[0][0])
        raise ToothfillError(f"degenerate (zero-area) face {bad}")


def load_obj(path) -> TriangleMesh:
    """Read an ASCII OBJ with v/f records (1-based indices, triangles only)."""
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ToothfillError(f"{path}:{lineno}: malformed vertex")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise ToothfillError(f"{path}:{lineno}: only triangle faces supported")
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                faces.append([i - 1 for i in idx])
            # other record types (vn, vt, o, g, s, usemtl ...) ignored
    if not verts:
        raise ToothfillError(f"{path}: no vertices")
    mesh = TriangleMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))
    _reject_degenerate(mesh)
    return mesh


def save_obj(path, mesh: TriangleMesh) -> None:
    """Write v/f records.  %.17g keeps float64 coordinates exact on reload."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def _edge_counts(faces: np.ndarray) -> dict[tuple[int, int], list[int]]:
    """Map undirected edge -> [forward count, backward count]."""
    counts: dict[tuple[int, int], list[int]] = {}
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            u, v = int(u), int(v)
            if u < v:
                key, fwd = (u, v), 0
            else:
                key, fwd = (v, u), 1
            slot = counts.setdefault(key, [0, 0])
            slot[fwd] += 1
    return counts


def is_watertight(mesh: TriangleMesh) -> bool:
    """True iff every edge is shared by exactly two consistently oriented faces."""
    if mesh._watertight is not None:
        return mesh._watertight
    ok = mesh.n_faces > 0
    if ok:
        for fwd, bwd in _edge_counts(mesh.faces).values():
            if fwd != 1 or bwd != 1:
                ok = False
                break
    mesh._watertight = ok
    return ok


def normalize_to_unit_ball(mesh: TriangleMesh, margin: float = 0.0):
    """Center on the bounding-box midpoint and scale to radius 1 - margin.

    Returns (normalized mesh, transform).  The transform round-trips:
    transform.invert(transform.apply(p)) == p to 1e-9.
    """
    if mesh.n_vertices == 0:
        raise ToothfillError("cannot normalize an empty mesh")
    if not 0.0 <= margin < 1.0:
        raise ToothfillError("margin must be in [0, 1)")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    radius = np.linalg.norm(mesh.vertices - center, axis=1).max()
    scale = (1.0 - margin) / radius if radius > 0.0 else 1.0
    tf = NormalizationTransform(center=center, scale=scale)
    return TriangleMesh(tf.apply(mesh.vertices), mesh.faces.copy()), tf


def cross_section_loops(mesh: TriangleMesh, height: float, axis: int = 1) -> list[np.ndarray]:
    """Closed intersection loops of the mesh with the plane coord[axis] = height.

    Returns one (K, 3) array of ordered points per loop.  Requires a
    watertight mesh and a plane that avoids vertices (nudged internally).
    """
    coords = mesh.vertices[:, axis]
    h = float(height)
    # nudge off any vertex so every crossing is a proper edge crossing
    span = float(coords.max() - coords.min()) if len(coords) else 1.0
    step = 1e-9 * max(1.0, span)
    while np.any(np.abs(coords - h) < 1e-12 * max(1.0, span)):
        h += step

    segments: list[tuple[tuple[int, int], tuple[int, int]]] = []
    points: dict[tuple[int, int], np.ndarray] = {}

    def edge_point(i: int, j: int) -> tuple[int, int]:
        key = (i, j) if i < j else (j, i)
        if key not in points:
            a, b = mesh.vertices[key[0]], mesh.vertices[key[1]]
            t = (h - a[axis]) / (b[axis] - a[axis])
            points[key] = a + t * (b - a)
        return key

    for f in mesh.faces:
        side = coords[f] > h
        if side.all() or not side.any():
            continue
        # the vertex alone on its side pairs with both crossed edges
        if side.sum() == 1:
            lone = int(np.nonzero(side)[0][0])
        else:
            lone = int(np.nonzero(~side)[0][0])
        i, j, k = int(f[lone]), int(f[(lone + 1) % 3]), int(f[(lone + 2) % 3])
        segments.append((edge_point(i, j), edge_point(i, k)))

    # link segments into loops by shared edge keys
    adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    visited: set[tuple[int, int]] = set()
    loops = []
    for start in adj:
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        prev, cur = None, start
        while True:
            nxts = [n for n in adj[cur] if n != prev]
            if not nxts:
                break
            nxt = nxts[0]
            if nxt == start:
                break
            if nxt in visited:
                break
            loop.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        if len(loop) >= 3:
            loops.append(np.array([points[k] for k in loop]))
    return loops
