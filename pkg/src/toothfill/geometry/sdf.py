"""Exact signed distances to meshes and 2D contours, plus SDF sampling.

The point-triangle kernel is written with explicit per-component
arithmetic so that the vectorized path evaluates the same floating-point
expression tree as a scalar reference loop: minima over triangle subsets
are then reproducible bit for bit.  The k-d-tree prefilter only discards
triangles that are provably farther than a computed upper bound, so it
never changes the returned minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import OpenSurface, ToothfillError
from .mesh import TriangleMesh, is_watertight

# Default clamp radius for SDF supervision values.
SDF_CLAMP = 0.1

_CHUNK_PAIRS = 1 << 20  # max point x triangle pairs held in memory at once


# ---------------------------------------------------------------------------
# point-triangle distance (Eberly region method, component arithmetic)
# ---------------------------------------------------------------------------

def _tri_components(mesh: TriangleMesh):
    tri = mesh.triangles()
    v0 = tri[:, 0]
    e0 = tri[:, 1] - v0
    e1 = tri[:, 2] - v0
    return v0, e0, e1


def _point_triangle_st(px, py, pz, v0, e0, e1):
    """Clamped parametric coordinates (s, t) of the closest triangle point.

    All inputs broadcast; outputs have the broadcast shape.  Mirrors the
    classic region-by-region closest-point construction with a fixed
    expression order.
    """
    e0x, e0y, e0z = e0[..., 0], e0[..., 1], e0[..., 2]
    e1x, e1y, e1z = e1[..., 0], e1[..., 1], e1[..., 2]
    bx = v0[..., 0] - px
    by = v0[..., 1] - py
    bz = v0[..., 2] - pz

    a = e0x * e0x + e0y * e0y + e0z * e0z
    b = e0x * e1x + e0y * e1y + e0z * e1z
    c = e1x * e1x + e1y * e1y + e1z * e1z
    d = e0x * bx + e0y * by + e0z * bz
    e = e1x * bx + e1y * by + e1z * bz

    det = a * c - b * b
    s = b * e - c * d
    t = b * d - a * e

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = a - 2.0 * b + c

        # edge t=0:   s = clamp(-d/a)
        s_t0 = np.where(d >= 0.0, 0.0, np.where(-d >= a, 1.0, -d / a))
        # edge s=0:   t = clamp(-e/c)
        t_s0 = np.where(e >= 0.0, 0.0, np.where(-e >= c, 1.0, -e / c))
        # edge s+t=1 entered from region 1
        numer1 = c + e - b - d
        s_r1 = np.where(numer1 <= 0.0, 0.0, np.where(numer1 >= denom, 1.0, numer1 / denom))
        # region 2: compare gradient components
        tmp0_2 = b + d
        tmp1_2 = c + e
        numer2 = tmp1_2 - tmp0_2
        s_r2_edge = np.where(numer2 >= denom, 1.0, numer2 / denom)
        # region 6 (mirror of 2)
        tmp0_6 = b + e
        tmp1_6 = a + d
        numer6 = tmp1_6 - tmp0_6
        t_r6_edge = np.where(numer6 >= denom, 1.0, numer6 / denom)

        s_int = s / det
        t_int = t / det

    inside = (s + t <= det) & (s >= 0.0) & (t >= 0.0)

    reg1 = (s + t > det) & (s >= 0.0) & (t >= 0.0)
    reg2 = (s + t > det) & (s < 0.0)
    reg6 = (s + t > det) & (s >= 0.0) & (t < 0.0)
    reg3 = (s + t <= det) & (s < 0.0) & (t >= 0.0)
    reg5 = (s + t <= det) & (s >= 0.0) & (t < 0.0)
    reg4 = (s + t <= det) & (s < 0.0) & (t < 0.0)

    s_out = np.where(inside, s_int, 0.0)
    t_out = np.where(inside, t_int, 0.0)

    s_out = np.where(reg1, s_r1, s_out)
    t_out = np.where(reg1, 1.0 - s_r1, t_out)

    in2_edge = reg2 & (tmp1_2 > tmp0_2)
    s_out = np.where(in2_edge, s_r2_edge, s_out)
    t_out = np.where(in2_edge, 1.0 - s_r2_edge, t_out)
    in2_s0 = reg2 & ~(tmp1_2 > tmp0_2)
    s_out = np.where(in2_s0, 0.0, s_out)
    t_out = np.where(in2_s0, np.where(tmp1_2 <= 0.0, 1.0, t_s0), t_out)

    in6_edge = reg6 & (tmp1_6 > tmp0_6)
    t_out = np.where(in6_edge, t_r6_edge, t_out)
    s_out = np.where(in6_edge, 1.0 - t_r6_edge, s_out)
    in6_t0 = reg6 & ~(tmp1_6 > tmp0_6)
    t_out = np.where(in6_t0, 0.0, t_out)
    s_out = np.where(in6_t0, np.where(tmp1_6 <= 0.0, 1.0, s_t0), s_out)

    s_out = np.where(reg3, 0.0, s_out)
    t_out = np.where(reg3, t_s0, t_out)

    t_out = np.where(reg5, 0.0, t_out)
    s_out = np.where(reg5, s_t0, s_out)

    in4_t0 = reg4 & (d < 0.0)
    s_out = np.where(in4_t0, s_t0, s_out)
    t_out = np.where(in4_t0, 0.0, t_out)
    in4_s0 = reg4 & ~(d < 0.0)
    s_out = np.where(in4_s0, 0.0, s_out)
    t_out = np.where(in4_s0, t_s0, t_out)

    return s_out, t_out


def _closest_from_st(px, py, pz, tri, s, t):
    """Closest points and squared distances from barycentric coordinates.

    Uses w0*V0 + s*V1 + t*V2 so that corner coordinates reproduce mesh
    vertices exactly (distance 0.0 at a vertex query).
    """
    w0 = 1.0 - s - t
    cx = w0 * tri[..., 0, 0] + s * tri[..., 1, 0] + t * tri[..., 2, 0]
    cy = w0 * tri[..., 0, 1] + s * tri[..., 1, 1] + t * tri[..., 2, 1]
    cz = w0 * tri[..., 0, 2] + s * tri[..., 1, 2] + t * tri[..., 2, 2]
    dx = cx - px
    dy = cy - py
    dz = cz - pz
    sq = dx * dx + dy * dy + dz * dz
    return sq, cx, cy, cz


def _dense_min(pts: np.ndarray, tri, v0, e0, e1, want_closest: bool):
    """Exact minimum over every triangle, chunked over points."""
    n_pts, n_tri = len(pts), len(tri)
    dists = np.empty(n_pts)
    closest = np.empty((n_pts, 3)) if want_closest else None
    chunk = max(1, _CHUNK_PAIRS // n_tri)
    for lo in range(0, n_pts, chunk):
        p = pts[lo:lo + chunk]
        px = p[:, 0:1]
        py = p[:, 1:2]
        pz = p[:, 2:3]
        s, t = _point_triangle_st(px, py, pz, v0[None, :, :], e0[None, :, :], e1[None, :, :])
        sq, cx, cy, cz = _closest_from_st(px, py, pz, tri[None, ...], s, t)
        j = np.argmin(sq, axis=1)
        rows = np.arange(len(p))
        dists[lo:lo + len(p)] = np.sqrt(sq[rows, j])
        if want_closest:
            closest[lo:lo + len(p), 0] = cx[rows, j]
            closest[lo:lo + len(p), 1] = cy[rows, j]
            closest[lo:lo + len(p), 2] = cz[rows, j]
    return dists, closest


def _mesh_query(mesh: TriangleMesh, points: np.ndarray, want_closest: bool):
    """Unsigned distances (and closest surface points) for a batch of queries.

    Large meshes take a k-nearest-centroids shortcut; whenever the candidate
    minimum does not provably beat every unexamined triangle, the remaining
    candidates are fetched by a ball query, so the result always equals the
    dense minimum exactly.
    """
    pts = np.atleast_2d(np.ascontiguousarray(points, dtype=np.float64))
    n_pts, n_tri = len(pts), mesh.n_faces
    if n_tri == 0:
        raise ToothfillError("mesh has no faces")
    tri = np.ascontiguousarray(mesh.triangles())

    def dense(p):
        if _HAVE_NUMBA:
            return _dense_min_jit(p, tri)
        v0, e0, e1 = _tri_components(mesh)
        return _dense_min(p, tri, v0, e0, e1, True)

    if n_tri <= 256 or n_pts * n_tri <= (1 << 16):
        dists, closest = dense(pts)
        return dists, (closest if want_closest else None)

    centroids = tri.mean(axis=1)
    rad = np.sqrt(((tri - centroids[:, None, :]) ** 2).sum(axis=2)).max(axis=1)
    rad_max = float(rad.max())
    tree = cKDTree(centroids)
    k = min(32, n_tri)

    _, i_knn = tree.query(pts, k=k)
    i_knn = np.ascontiguousarray(i_knn, dtype=np.int64)
    d_kth = np.sqrt(((centroids[i_knn[:, -1]] - pts) ** 2).sum(axis=1))
    if _HAVE_NUMBA:
        dists, closest = _subset_min_jit(pts, tri, i_knn)
    else:
        v0, e0, e1 = _tri_components(mesh)
        dists = np.empty(n_pts)
        closest = np.empty((n_pts, 3))
        chunk = max(1, _CHUNK_PAIRS // k)
        for lo in range(0, n_pts, chunk):
            p = pts[lo:lo + chunk]
            idx = i_knn[lo:lo + chunk]
            px, py, pz = p[:, 0:1], p[:, 1:2], p[:, 2:3]
            s, t = _point_triangle_st(px, py, pz, v0[idx], e0[idx], e1[idx])
            sq, cx, cy, cz = _closest_from_st(px, py, pz, tri[idx], s, t)
            j = np.argmin(sq, axis=1)
            rows = np.arange(len(p))
            dists[lo:lo + len(p)] = np.sqrt(sq[rows, j])
            closest[lo:lo + len(p), 0] = cx[rows, j]
            closest[lo:lo + len(p), 1] = cy[rows, j]
            closest[lo:lo + len(p), 2] = cz[rows, j]

    # any skipped triangle has distance >= kth centroid distance - rad_max
    unsafe = np.nonzero(dists > d_kth - rad_max - 1e-9)[0]
    for row in unsafe:
        # every triangle that could still beat the candidate minimum has
        # its centroid within dists[row] + rad_max of the query point
        cand = tree.query_ball_point(pts[row], dists[row] + rad_max + 1e-9)
        if len(cand) == 0:
            continue
        cand = np.asarray(cand, dtype=np.int64).reshape(1, -1)
        if _HAVE_NUMBA:
            d2, c2 = _subset_min_jit(pts[row:row + 1], tri, cand)
        else:
            v0, e0, e1 = _tri_components(mesh)
            qx, qy, qz = pts[row, 0], pts[row, 1], pts[row, 2]
            s2, t2 = _point_triangle_st(qx, qy, qz, v0[cand[0]], e0[cand[0]], e1[cand[0]])
            sq2, cx2, cy2, cz2 = _closest_from_st(qx, qy, qz, tri[cand[0]], s2, t2)
            j2 = int(np.argmin(sq2))
            d2 = np.array([np.sqrt(sq2[j2])])
            c2 = np.array([[cx2[j2], cy2[j2], cz2[j2]]])
        if d2[0] < dists[row]:
            dists[row] = d2[0]
            closest[row] = c2[0]
    return dists, (closest if want_closest else None)


def _winding_numpy(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    n_tri = len(tri)
    out = np.empty(len(pts))
    chunk = max(1, _CHUNK_PAIRS // max(n_tri, 1))
    for lo in range(0, len(pts), chunk):
        p = pts[lo:lo + chunk]
        px, py, pz = p[:, 0:1], p[:, 1:2], p[:, 2:3]
        ax = tri[None, :, 0, 0] - px
        ay = tri[None, :, 0, 1] - py
        az = tri[None, :, 0, 2] - pz
        bx = tri[None, :, 1, 0] - px
        by = tri[None, :, 1, 1] - py
        bz = tri[None, :, 1, 2] - pz
        cx = tri[None, :, 2, 0] - px
        cy = tri[None, :, 2, 1] - py
        cz = tri[None, :, 2, 2] - pz
        la = np.sqrt(ax * ax + ay * ay + az * az)
        lb = np.sqrt(bx * bx + by * by + bz * bz)
        lc = np.sqrt(cx * cx + cy * cy + cz * cz)
        # a . (b x c)
        numer = (ax * (by * cz - bz * cy)
                 + ay * (bz * cx - bx * cz)
                 + az * (bx * cy - by * cx))
        denom = (la * lb * lc
                 + (ax * bx + ay * by + az * bz) * lc
                 + (bx * cx + by * cy + bz * cz) * la
                 + (cx * ax + cy * ay + cz * az) * lb)
        omega = 2.0 * np.arctan2(numer, denom)
        out[lo:lo + chunk] = omega.sum(axis=1) / (4.0 * np.pi)
    return out


try:  # JIT path: the solid-angle sum is the hot loop of SDF sampling
    from numba import njit as _njit

    @_njit(cache=True, inline="always")
    def _pt_tri_sq_jit(px, py, pz, v0x, v0y, v0z, v1x, v1y, v1z, v2x, v2y, v2z):  # pragma: no cover
        """Squared distance + closest point, same branch order as the
        region-method reference implementation."""
        e0x = v1x - v0x
        e0y = v1y - v0y
        e0z = v1z - v0z
        e1x = v2x - v0x
        e1y = v2y - v0y
        e1z = v2z - v0z
        bx = v0x - px
        by = v0y - py
        bz = v0z - pz
        a = e0x * e0x + e0y * e0y + e0z * e0z
        b = e0x * e1x + e0y * e1y + e0z * e1z
        c = e1x * e1x + e1y * e1y + e1z * e1z
        d = e0x * bx + e0y * by + e0z * bz
        e = e1x * bx + e1y * by + e1z * bz
        det = a * c - b * b
        s = b * e - c * d
        t = b * d - a * e
        if s + t <= det:
            if s < 0.0:
                if t < 0.0:  # region 4
                    if d < 0.0:
                        t = 0.0
                        s = 1.0 if -d >= a else -d / a
                    else:
                        s = 0.0
                        t = 0.0 if e >= 0.0 else (1.0 if -e >= c else -e / c)
                else:  # region 3
                    s = 0.0
                    t = 0.0 if e >= 0.0 else (1.0 if -e >= c else -e / c)
            elif t < 0.0:  # region 5
                t = 0.0
                s = 0.0 if d >= 0.0 else (1.0 if -d >= a else -d / a)
            else:  # region 0
                s = s / det
                t = t / det
        else:
            if s < 0.0:  # region 2
                tmp0 = b + d
                tmp1 = c + e
                if tmp1 > tmp0:
                    numer = tmp1 - tmp0
                    denom = a - 2.0 * b + c
                    s = 1.0 if numer >= denom else numer / denom
                    t = 1.0 - s
                else:
                    s = 0.0
                    t = 1.0 if tmp1 <= 0.0 else (0.0 if e >= 0.0 else -e / c)
            elif t < 0.0:  # region 6
                tmp0 = b + e
                tmp1 = a + d
                if tmp1 > tmp0:
                    numer = tmp1 - tmp0
                    denom = a - 2.0 * b + c
                    t = 1.0 if numer >= denom else numer / denom
                    s = 1.0 - t
                else:
                    t = 0.0
                    s = 1.0 if tmp1 <= 0.0 else (0.0 if d >= 0.0 else -d / a)
            else:  # region 1
                numer = c + e - b - d
                if numer <= 0.0:
                    s = 0.0
                    t = 1.0
                else:
                    denom = a - 2.0 * b + c
                    s = 1.0 if numer >= denom else numer / denom
                    t = 1.0 - s
        w0 = 1.0 - s - t
        cx = w0 * v0x + s * v1x + t * v2x
        cy = w0 * v0y + s * v1y + t * v2y
        cz = w0 * v0z + s * v1z + t * v2z
        dx = cx - px
        dy = cy - py
        dz = cz - pz
        return dx * dx + dy * dy + dz * dz, cx, cy, cz

    @_njit(cache=True)
    def _dense_min_jit(pts, tri):  # pragma: no cover - compiled
        n_pts = pts.shape[0]
        n_tri = tri.shape[0]
        dists = np.empty(n_pts)
        closest = np.empty((n_pts, 3))
        for i in range(n_pts):
            px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
            best = np.inf
            bx = by = bz = 0.0
            for t in range(n_tri):
                sq, cx, cy, cz = _pt_tri_sq_jit(
                    px, py, pz,
                    tri[t, 0, 0], tri[t, 0, 1], tri[t, 0, 2],
                    tri[t, 1, 0], tri[t, 1, 1], tri[t, 1, 2],
                    tri[t, 2, 0], tri[t, 2, 1], tri[t, 2, 2])
                if sq < best:
                    best = sq
                    bx, by, bz = cx, cy, cz
            dists[i] = np.sqrt(best)
            closest[i, 0] = bx
            closest[i, 1] = by
            closest[i, 2] = bz
        return dists, closest

    @_njit(cache=True)
    def _subset_min_jit(pts, tri, cand):  # pragma: no cover - compiled
        n_pts = pts.shape[0]
        k = cand.shape[1]
        dists = np.empty(n_pts)
        closest = np.empty((n_pts, 3))
        for i in range(n_pts):
            px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
            best = np.inf
            bx = by = bz = 0.0
            for j in range(k):
                t = cand[i, j]
                sq, cx, cy, cz = _pt_tri_sq_jit(
                    px, py, pz,
                    tri[t, 0, 0], tri[t, 0, 1], tri[t, 0, 2],
                    tri[t, 1, 0], tri[t, 1, 1], tri[t, 1, 2],
                    tri[t, 2, 0], tri[t, 2, 1], tri[t, 2, 2])
                if sq < best:
                    best = sq
                    bx, by, bz = cx, cy, cz
            dists[i] = np.sqrt(best)
            closest[i, 0] = bx
            closest[i, 1] = by
            closest[i, 2] = bz
        return dists, closest

    @_njit(cache=True)
    def _winding_jit(tri, pts):  # pragma: no cover - compiled
        n_pts = pts.shape[0]
        n_tri = tri.shape[0]
        out = np.empty(n_pts)
        for i in range(n_pts):
            px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
            acc = 0.0
            for t in range(n_tri):
                ax = tri[t, 0, 0] - px
                ay = tri[t, 0, 1] - py
                az = tri[t, 0, 2] - pz
                bx = tri[t, 1, 0] - px
                by = tri[t, 1, 1] - py
                bz = tri[t, 1, 2] - pz
                cx = tri[t, 2, 0] - px
                cy = tri[t, 2, 1] - py
                cz = tri[t, 2, 2] - pz
                la = np.sqrt(ax * ax + ay * ay + az * az)
                lb = np.sqrt(bx * bx + by * by + bz * bz)
                lc = np.sqrt(cx * cx + cy * cy + cz * cz)
                numer = (ax * (by * cz - bz * cy)
                         + ay * (bz * cx - bx * cz)
                         + az * (bx * cy - by * cx))
                denom = (la * lb * lc
                         + (ax * bx + ay * by + az * bz) * lc
                         + (bx * cx + by * cy + bz * cz) * la
                         + (cx * ax + cy * ay + cz * az) * lb)
                acc += 2.0 * np.arctan2(numer, denom)
            out[i] = acc / (4.0 * np.pi)
        return out

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


def winding_number(mesh: TriangleMesh, points: np.ndarray) -> np.ndarray:
    """Generalized winding number via the solid-angle sum over all faces."""
    pts = np.atleast_2d(np.ascontiguousarray(points, dtype=np.float64))
    tri = np.ascontiguousarray(mesh.triangles())
    if _HAVE_NUMBA and pts.shape[0] * max(len(tri), 1) > 65536:
        return _winding_jit(tri, pts)
    return _winding_numpy(tri, pts)


def signed_distance(mesh: TriangleMesh, points) -> np.ndarray | float:
    """Exact signed distance: min over all triangles, sign from winding.

    Negative inside (winding >= 0.5).  Raises OpenSurface on meshes whose
    inside is undefined.
    """
    if not is_watertight(mesh):
        raise OpenSurface("mesh is not watertight; sign undefined")
    single = np.asarray(points).ndim == 1
    dists, _ = _mesh_query(mesh, points, want_closest=False)
    wn = winding_number(mesh, points)
    signs = np.where(wn >= 0.5, -1.0, 1.0)
    sd = signs * dists
    return float(sd[0]) if single else sd


def point_mesh_distance(mesh: TriangleMesh, points) -> np.ndarray | float:
    """Unsigned exact distance to the mesh surface."""
    single = np.asarray(points).ndim == 1
    dists, _ = _mesh_query(mesh, points, want_closest=False)
    return float(dists[0]) if single else dists


def closest_point_on_mesh(mesh: TriangleMesh, points):
    """(distances, closest surface points) for a batch of queries."""
    dists, closest = _mesh_query(mesh, points, want_closest=True)
    return dists, closest


# ---------------------------------------------------------------------------
# surface and SDF sampling
# ---------------------------------------------------------------------------

def sample_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator,
                   face_mask: np.ndarray | None = None):
    """Area-weighted uniform surface samples.  Returns (points, face ids)."""
    areas = mesh.face_areas()
    if face_mask is not None:
        areas = np.where(face_mask, areas, 0.0)
    total = areas.sum()
    if total <= 0.0:
        raise ToothfillError("mesh has no sampleable area")
    cdf = np.cumsum(areas) / total
    fidx = np.searchsorted(cdf, rng.random(n), side="right").clip(0, mesh.n_faces - 1)
    tri = mesh.vertices[mesh.faces[fidx]]
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    return pts, fidx


def _uniform_ball(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((n, 3))
    filled = 0
    while filled < n:
        cand = rng.uniform(-radius, radius, size=(2 * (n - filled) + 8, 3))
        keep = cand[(cand ** 2).sum(axis=1) <= radius * radius]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def sample_sdf_3d(mesh: TriangleMesh, n_near: int, n_uniform: int,
                  noise_sigma: float, seed: int, clamp: float = SDF_CLAMP,
                  max_norm: float = 1.2, face_mask: np.ndarray | None = None):
    """Supervision pairs: perturbed surface points plus uniform ball points.

    Near-surface points are drawn twice per base surface point, at sigma
    and sigma/10.  Every value is the exact signed distance clamped to
    [-clamp, clamp].  Deterministic in seed.
    """
    rng = np.random.default_rng(seed)
    pts_list = []
    if n_near > 0:
        n_hi = (n_near + 1) // 2
        base, _ = sample_surface(mesh, n_hi, rng, face_mask=face_mask)
        for count, sigma in ((n_hi, noise_sigma), (n_near - n_hi, noise_sigma / 10.0)):
            if count == 0:
                continue
            p = base[:count] + sigma * rng.standard_normal((count, 3))
            # redraw noise for points escaping the query ball
            while True:
                bad = np.nonzero((p ** 2).sum(axis=1) > max_norm * max_norm)[0]
                if len(bad) == 0:
                    break
                p[bad] = base[bad] + sigma * rng.standard_normal((len(bad), 3))
            pts_list.append(p)
    if n_uniform > 0:
        pts_list.append(_uniform_ball(n_uniform, 1.1, rng))
    if not pts_list:
        return np.empty((0, 3)), np.empty((0,))
    pts = np.concatenate(pts_list, axis=0)
    vals = np.clip(signed_distance(mesh, pts), -clamp, clamp)
    return pts, vals


# ---------------------------------------------------------------------------
# 2D contours
# ---------------------------------------------------------------------------

@dataclass
class Polygon2D:
    """Simple closed polygon, counter-clockwise, in normalized coordinates."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ToothfillError("polygon vertices must be (N, 2)")
        if len(self.vertices) < 3:
            raise ToothfillError("polygon needs at least 3 vertices")
        if self.signed_area() <= 0.0:
            raise ToothfillError("polygon must be counter-clockwise with positive area")
        if not self._is_simple():
            raise ToothfillError("polygon is self-intersecting")

    def signed_area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        return float(0.5 * np.sum(x * yn - xn * y))

    def _is_simple(self) -> bool:
        """No proper crossings between non-adjacent edges (orientation test)."""
        v = self.vertices
        n = len(v)
        a = v
        b = np.roll(v, -1, axis=0)
        scale2 = max(1e-30, float(np.abs(v).max()) ** 2)
        eps = 1e-12 * scale2

        def orient(p, qx, qy, rx, ry):
            return (qx - p[0]) * (ry - p[1]) - (qy - p[1]) * (rx - p[0])

        for i in range(n):
            js = np.arange(i + 2, n if i > 0 else n - 1)
            if len(js) == 0:
                continue
            cx, cy = a[js, 0], a[js, 1]
            dx, dy = b[js, 0], b[js, 1]
            o1 = orient(a[i], b[i, 0], b[i, 1], cx, cy)
            o2 = orient(a[i], b[i, 0], b[i, 1], dx, dy)
            o3 = (dx - cx) * (a[i, 1] - cy) - (dy - cy) * (a[i, 0] - cx)
            o4 = (dx - cx) * (b[i, 1] - cy) - (dy - cy) * (b[i, 0] - cx)
            straddle1 = ((o1 > eps) & (o2 < -eps)) | ((o1 < -eps) & (o2 > eps))
            straddle2 = ((o3 > eps) & (o4 < -eps)) | ((o4 > eps) & (o3 < -eps))
            if (straddle1 & straddle2).any():
                return False
        return True


def contour_sdf(poly: Polygon2D, points) -> np.ndarray | float:
    """Signed distance to the polygon boundary: negative inside (even-odd)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    single = np.asarray(points).ndim == 1
    a = poly.vertices
    b = np.roll(a, -1, axis=0)
    ab = b - a
    ab2 = (ab ** 2).sum(axis=1)

    px = pts[:, 0:1]
    py = pts[:, 1:2]
    apx = px - a[None, :, 0]
    apy = py - a[None, :, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (apx * ab[None, :, 0] + apy * ab[None, :, 1]) / ab2[None, :]
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    cx = a[None, :, 0] + t * ab[None, :, 0]
    cy = a[None, :, 1] + t * ab[None, :, 1]
    dx = cx - px
    dy = cy - py
    dist = np.sqrt((dx * dx + dy * dy).min(axis=1))

    # even-odd crossing count with the half-open rule
    ay = a[None, :, 1]
    by = b[None, :, 1]
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[None, :, 0] + (py - ay) * ab[None, :, 0] / ab[None, :, 1]
    crossings = (cond & (xint > px)).sum(axis=1)
    inside = crossings % 2 == 1
    sd = np.where(inside, -dist, dist)
    return float(sd[0]) if single else sd


def sample_sdf_2d(poly: Polygon2D, n_near: int, n_uniform: int,
                  noise_sigma: float, seed: int, clamp: float = SDF_CLAMP):
    """2D analogue of sample_sdf_3d: near-boundary plus uniform box samples."""
    rng = np.random.default_rng(seed)
    a = poly.vertices
    b = np.roll(a, -1, axis=0)
    seg_len = np.sqrt(((b - a) ** 2).sum(axis=1))
    cdf = np.cumsum(seg_len) / seg_len.sum()

    pts_list = []
    if n_near > 0:
        n_hi = (n_near + 1) // 2
        eidx = np.searchsorted(cdf, rng.random(n_hi), side="right").clip(0, len(a) - 1)
        frac = rng.random(n_hi)[:, None]
        base = a[eidx] + frac * (b[eidx] - a[eidx])
        for count, sigma in ((n_hi, noise_sigma), (n_near - n_hi, noise_sigma / 10.0)):
            if count == 0:
                continue
            p = base[:count] + sigma * rng.standard_normal((count, 2))
            while True:
                bad = np.nonzero(np.abs(p).max(axis=1) > 1.0)[0]
                if len(bad) == 0:
                    break
                p[bad] = base[bad] + sigma * rng.standard_normal((len(bad), 2))
            pts_list.append(p)
    if n_uniform > 0:
        pts_list.append(rng.uniform(-1.0, 1.0, size=(n_uniform, 2)))
    if not pts_list:
        return np.empty((0, 2)), np.empty((0,))
    pts = np.concatenate(pts_list, axis=0)
    vals = np.clip(contour_sdf(poly, pts), -clamp, clamp)
    return pts, vals


# ---------------------------------------------------------------------------
# binary sample dumps
# ---------------------------------------------------------------------------

_SDF_MAGIC = b"SDF1"


def write_sdf_samples(path, points: np.ndarray, values: np.ndarray) -> None:
    """Dump (point, value) records: magic, u64 LE count, f32 LE fields."""
    pts = np.asarray(points, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ToothfillError("points must be (N, 2) or (N, 3)")
    if len(pts) != len(vals):
        raise ToothfillError("points/values length mismatch")
    rec = np.empty((len(pts), pts.shape[1] + 1), dtype="<f4")
    rec[:, :pts.shape[1]] = pts
    rec[:, -1] = vals
    with open(path, "wb") as fh:
        fh.write(_SDF_MAGIC)
        fh.write(np.array(len(pts), dtype="<u8").tobytes())
        fh.write(rec.tobytes())


def read_sdf_samples(path):
    """Read a dump written by write_sdf_samples.  Returns float64 arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _SDF_MAGIC:
        raise ToothfillError(f"{path}: bad magic")
    count = int(np.frombuffer(blob[4:12], dtype="<u8")[0])
    payload = blob[12:]
    if count == 0:
        return np.empty((0, 3)), np.empty((0,))
    if len(payload) % (4 * count) != 0:
        raise ToothfillError(f"{path}: truncated sample dump")
    width = len(payload) // (4 * count)
    if width not in (3, 4):
        raise ToothfillError(f"{path}: unsupported record width {width}")
    rec = np.frombuffer(payload, dtype="<f4").reshape(count, width).astype(np.float64)
    return rec[:, :-1].copy(), rec[:, -1].copy()
