"""Procedural tooth-like shapes with exact ground truth.

Each shape is a star-shaped radial field sampled on an icosphere: a
bump-textured crown blended with 1-3 splayed root lobes.  Star-shaped
construction guarantees watertight genus-0 meshes with no
self-intersections.  Root azimuths are fixed so that the z-view
silhouette shows the roots of 1- and 2-rooted teeth but hides the third
root of 3-rooted ones behind the tooth body - the ambiguity that the
adversarial regularizer is meant to resolve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import shapely
import shapely.geometry as sgeom
from shapely.ops import unary_union

from .errors import EmptyCrown, InvalidSpec, ToothfillError
from .geometry.mesh import TriangleMesh, is_watertight, normalize_to_unit_ball, save_obj
from .geometry.primitives import icosphere
from .geometry.sdf import (
    Polygon2D,
    point_mesh_distance,
    sample_sdf_2d,
    sample_surface,
    signed_distance,
    write_sdf_samples,
)

GENERATOR_VERSION = 1

# root azimuths per root count; the third root points along +z where the
# z-view silhouette cannot see it
_ROOT_AZIMUTHS = {1: (0.0,), 2: (0.0, np.pi), 3: (0.0, np.pi, np.pi / 2.0)}


@dataclass
class ToothSpec:
    crown_radius: float = 1.0
    crown_height: float = 0.9
    taper: float = 0.15
    root_count: int = 2
    root_length: tuple = (1.7, 1.7)
    root_radius: tuple = (0.35, 0.35)
    root_splay: tuple = (0.4, 0.4)
    bump_amplitude: float = 0.025
    bump_frequency: float = 6.0
    seed: int = 0
    subdivisions: int = 4

    def validate(self):
        if self.root_count not in (1, 2, 3):
            raise InvalidSpec(f"root_count must be 1..3, got {self.root_count}")
        if len(self.root_length) != self.root_count or \
           len(self.root_radius) != self.root_count or \
           len(self.root_splay) != self.root_count:
            raise InvalidSpec("per-root parameter tuples must match root_count")
        if self.crown_radius <= 0 or self.crown_height <= 0:
            raise InvalidSpec("crown dimensions must be positive")
        if min(self.root_length) <= 0 or min(self.root_radius) <= 0:
            raise InvalidSpec("root dimensions must be positive")
        if min(self.root_splay) < 0 or max(self.root_splay) > 1.0:
            raise InvalidSpec("root splay must be in [0, 1] radians")
        if self.bump_amplitude < 0 or self.bump_amplitude > 0.2:
            raise InvalidSpec("bump amplitude out of range")
        if max(self.root_length) <= self.crown_height * 0.5:
            raise InvalidSpec("roots too short relative to crown")


def _smoothstep(x):
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def generate_tooth(spec: ToothSpec) -> TriangleMesh:
    """Watertight genus-0 tooth mesh, normalized into the unit ball."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    phase1 = rng.uniform(0.0, 2.0 * np.pi)
    phase2 = rng.uniform(0.0, 2.0 * np.pi)

    base = icosphere(spec.subdivisions)
    d = base.vertices  # unit directions
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    azim = np.arctan2(dz, dx)

    # crown: ellipsoid radius faded out below the cervix
    a = spec.crown_radius
    b = spec.crown_height
    r_ell = 1.0 / np.sqrt((dx * dx + dz * dz) / (a * a) + (dy * dy) / (b * b))
    widen = 1.0 + spec.taper * _smoothstep(dy / 0.8)
    bumps = (np.cos(spec.bump_frequency * azim + phase1)
             * np.cos(2.0 * spec.bump_frequency * dy + phase2)
             * _smoothstep((dy - 0.05) / 0.25))
    crown = r_ell * widen * (1.0 + spec.bump_amplitude * bumps) * _smoothstep((dy + 0.45) / 0.35)

    lobes = [crown, np.full(len(d), 0.18 * spec.crown_radius)]
    azimuths = _ROOT_AZIMUTHS[spec.root_count]
    for k in range(spec.root_count):
        splay = spec.root_splay[k]
        phi = azimuths[k]
        axis = np.array([np.sin(splay) * np.cos(phi), -np.cos(splay),
                         np.sin(splay) * np.sin(phi)])
        cosang = np.clip(d @ axis, -1.0, 1.0)
        theta = np.arccos(cosang)
        width = np.arctan2(spec.root_radius[k], spec.root_length[k]) * 1.5
        lobes.append(spec.root_length[k] * np.exp(-(theta / width) ** 2))

    # smooth max: p-norm blend of all lobes
    p = 8.0
    r = (np.sum(np.stack(lobes, axis=0) ** p, axis=0)) ** (1.0 / p)
    mesh = TriangleMesh(r[:, None] * d, base.faces.copy())
    if not is_watertight(mesh):
        raise InvalidSpec("generated surface is not watertight")
    out, _ = normalize_to_unit_ball(mesh, margin=0.02)
    return out


# ---------------------------------------------------------------------------
# partial crown cutting
# ---------------------------------------------------------------------------

def make_partial_crown(full: TriangleMesh, cut_fraction: float) -> TriangleMesh:
    """Keep the surface above the cut plane and cap it watertight.

    The plane sits at ymin + cut_fraction * (ymax - ymin).  Cap triangles
    are fans over the planar cut loops; they are detectable afterwards as
    faces whose three vertices all lie on the cut plane.
    """
    if cut_fraction < 0.0:
        raise ToothfillError("cut_fraction must be non-negative")
    ys = full.vertices[:, 1]
    ymin, ymax = float(ys.min()), float(ys.max())
    h = ymin + cut_fraction * (ymax - ymin)
    if h <= ymin:
        return full.copy()
    # nudge off vertices so every crossing is a proper edge crossing
    step = 1e-9 * max(1.0, ymax - ymin)
    while np.any(np.abs(ys - h) < 1e-12):
        h += step
    if h >= ymax:
        raise EmptyCrown("cut plane above the whole mesh")

    above = ys > h
    verts = [v for v in full.vertices]
    cut_point: dict[tuple[int, int], int] = {}

    def point_on_edge(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key not in cut_point:
            pa, pb = full.vertices[key[0]], full.vertices[key[1]]
            t = (h - pa[1]) / (pb[1] - pa[1])
            cut_point[key] = len(verts)
            verts.append(pa + t * (pb - pa))
        return cut_point[key]

    faces: list[tuple[int, int, int]] = []
    boundary: dict[int, int] = {}  # directed cut edges of the kept surface

    for tri in full.faces:
        ia, ib, ic = (int(tri[0]), int(tri[1]), int(tri[2]))
        mask = (above[ia], above[ib], above[ic])
        n_up = sum(mask)
        if n_up == 3:
            faces.append((ia, ib, ic))
            continue
        if n_up == 0:
            continue
        # rotate so the lone vertex comes first
        order = [ia, ib, ic]
        lone_above = n_up == 1
        while not (above[order[0]] == lone_above and above[order[1]] != lone_above):
            order = order[1:] + order[:1]
        va, vb, vc = order
        p_ab = point_on_edge(va, vb)
        p_ca = point_on_edge(vc, va)
        if lone_above:
            faces.append((va, p_ab, p_ca))
            boundary[p_ab] = p_ca
        else:
            faces.append((p_ab, vb, vc))
            faces.append((p_ab, vc, p_ca))
            boundary[p_ca] = p_ab

    if not faces:
        raise EmptyCrown("nothing above the cut plane")

    # close each boundary loop with a fan around its centroid
    visited: set[int] = set()
    for start in list(boundary):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = boundary[start]
        while cur != start:
            loop.append(cur)
            visited.add(cur)
            cur = boundary[cur]
        centroid = np.mean([verts[i] for i in loop], axis=0)
        centroid[1] = h  # keep cap exactly planar
        cid = len(verts)
        verts.append(centroid)
        for u, v in zip(loop, loop[1:] + loop[:1]):
            faces.append((cid, v, u))

    # drop unreferenced vertices
    vert_arr = np.array(verts)
    used = np.unique(np.array(faces, dtype=np.int64))
    remap = -np.ones(len(vert_arr), dtype=np.int64)
    remap[used] = np.arange(len(used))
    out = TriangleMesh(vert_arr[used], remap[np.array(faces, dtype=np.int64)])
    return out


def cap_face_mask(crown: TriangleMesh, tol: float = 1e-9) -> np.ndarray:
    """True for cap faces: all three vertices on the bottom cut plane."""
    ys = crown.vertices[:, 1]
    h = ys.min()
    on_plane = np.abs(ys - h) <= tol * max(1.0, float(np.abs(ys).max()))
    return on_plane[crown.faces].all(axis=1)


# ---------------------------------------------------------------------------
# silhouette contours
# ---------------------------------------------------------------------------

def make_contour(full: TriangleMesh, view_dir=(0.0, 0.0, 1.0),
                 simplify_tol: float = 1e-4) -> Polygon2D:
    """Outer silhouette polygon of the orthographic projection along view_dir."""
    dir_vec = np.asarray(view_dir, dtype=np.float64)
    norm = np.linalg.norm(dir_vec)
    if norm < 1e-12:
        raise ToothfillError("degenerate view direction")
    dir_vec = dir_vec / norm
    up = np.array([0.0, 1.0, 0.0]) if abs(dir_vec[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(up, dir_vec)
    u /= np.linalg.norm(u)
    v = np.cross(dir_vec, u)

    tri = full.triangles()
    pu = tri @ u
    pv = tri @ v
    polys = []
    for k in range(len(tri)):
        ring = [(pu[k, 0], pv[k, 0]), (pu[k, 1], pv[k, 1]), (pu[k, 2], pv[k, 2])]
        poly = sgeom.Polygon(ring)
        if poly.area > 1e-12:
            polys.append(poly)
    # snap to a fine grid: sliver triangles otherwise break the union
    merged = unary_union(shapely.set_precision(np.array(polys, dtype=object), 1e-9))
    if merged.geom_type == "MultiPolygon":
        merged = max(merged.geoms, key=lambda g: g.area)
    merged = merged.simplify(simplify_tol, preserve_topology=True)
    ring = np.asarray(merged.exterior.coords, dtype=np.float64)[:-1]
    # enforce counter-clockwise orientation
    x, y = ring[:, 0], ring[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area2 < 0.0:
        ring = ring[::-1].copy()
    return Polygon2D(ring)


# ---------------------------------------------------------------------------
# supervision samples
# ---------------------------------------------------------------------------

def crown_supervision_samples(crown: TriangleMesh, n_near: int, n_uniform: int,
                              noise_sigma: float, seed: int, clamp: float = 0.1):
    """SDF pairs for the observed crown surface only.

    Near samples grow from non-cap faces; any sample whose nearest crown
    feature is the artificial cap, or that falls below the cut plane, is
    rejected, so supervision never claims surface where the scan saw none.
    """
    rng = np.random.default_rng(seed)
    mask = ~cap_face_mask(crown)
    if not mask.any():
        raise ToothfillError("crown mesh has no non-cap faces")
    wall = TriangleMesh(crown.vertices.copy(), crown.faces[mask].copy())
    h = crown.vertices[:, 1].min()

    def keep(points: np.ndarray) -> np.ndarray:
        ok_height = points[:, 1] >= h
        d_wall = point_mesh_distance(wall, points)
        d_all = point_mesh_distance(crown, points)
        return ok_height & (d_wall <= d_all + 1e-12)

    pts_list = []
    if n_near > 0:
        n_hi = (n_near + 1) // 2
        want = (n_hi, n_near - n_hi)
        for count, sigma in zip(want, (noise_sigma, noise_sigma / 10.0)):
            if count == 0:
                continue
            got: list[np.ndarray] = []
            total = 0
            for _ in range(12):
                base, _ = sample_surface(crown, 2 * count, rng, face_mask=mask)
                p = base + sigma * rng.standard_normal((2 * count, 3))
                p = p[keep(p)]
                got.append(p)
                total += len(p)
                if total >= count:
                    break
            pts_list.append(np.concatenate(got, axis=0)[:count])
    if n_uniform > 0:
        got = []
        total = 0
        for _ in range(24):
            cand = rng.uniform(-1.1, 1.1, size=(4 * n_uniform, 3))
            cand = cand[(cand ** 2).sum(axis=1) <= 1.1 * 1.1]
            cand = cand[keep(cand)]
            got.append(cand)
            total += len(cand)
            if total >= n_uniform:
                break
        pts_list.append(np.concatenate(got, axis=0)[:n_uniform])
    pts = np.concatenate(pts_list, axis=0)
    vals = np.clip(signed_distance(crown, pts), -clamp, clamp)
    return pts, vals


# ---------------------------------------------------------------------------
# corpus building
# ---------------------------------------------------------------------------

@dataclass
class ShapeRecord:
    shape_id: str
    spec: ToothSpec
    paths: dict[str, str]  # relative to the corpus root


@dataclass
class CorpusManifest:
    seed: int
    generator_version: int
    root_dir: str  # set when built or loaded, never persisted
    split: dict[str, list[str]]
    shapes: list[ShapeRecord] = field(default_factory=list)

    def record(self, shape_id: str) -> ShapeRecord:
        for rec in self.shapes:
            if rec.shape_id == shape_id:
                return rec
        raise ToothfillError(f"unknown shape id {shape_id!r}")

    def path(self, shape_id: str, kind: str) -> Path:
        return Path(self.root_dir) / self.record(shape_id).paths[kind]

    def save(self, path) -> None:
        doc = {
            "seed": self.seed,
            "generator_version": self.generator_version,
            "split": self.split,
            "shapes": [{"shape_id": r.shape_id, "spec": asdict(r.spec), "paths": r.paths}
                       for r in self.shapes],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        shapes = []
        for s in doc["shapes"]:
            spec_doc = dict(s["spec"])
            for key in ("root_length", "root_radius", "root_splay"):
                spec_doc[key] = tuple(spec_doc[key])
            shapes.append(ShapeRecord(s["shape_id"], ToothSpec(**spec_doc), s["paths"]))
        return cls(seed=doc["seed"], generator_version=doc["generator_version"],
                   root_dir=str(Path(path).parent), split=doc["split"], shapes=shapes)


def random_tooth_spec(seed: int, subdivisions: int = 4) -> ToothSpec:
    """Spec drawn from the default desk-scale parameter ranges."""
    rng = np.random.default_rng(seed)
    root_count = int(rng.integers(1, 4))
    if root_count == 1:
        splays = (float(rng.uniform(0.0, 0.1)),)
        lengths = (float(rng.uniform(1.5, 1.95)),)
    elif root_count == 2:
        splays = tuple(float(rng.uniform(0.38, 0.5)) for _ in range(2))
        lengths = tuple(float(rng.uniform(1.5, 1.95)) for _ in range(2))
    else:
        # the third (occluded, +z) root is shorter: only a stub of it would
        # show in the z-view silhouette
        splays = (float(rng.uniform(0.38, 0.5)), float(rng.uniform(0.38, 0.5)),
                  float(rng.uniform(0.44, 0.55)))
        lengths = (float(rng.uniform(1.5, 1.9)), float(rng.uniform(1.5, 1.9)),
                   float(rng.uniform(1.28, 1.5)))
    return ToothSpec(
        crown_radius=float(rng.uniform(0.85, 1.1)),
        crown_height=float(rng.uniform(0.7, 1.0)),
        taper=float(rng.uniform(0.05, 0.25)),
        root_count=root_count,
        root_length=lengths,
        root_radius=tuple(float(rng.uniform(0.28, 0.42)) for _ in range(root_count)),
        root_splay=splays,
        bump_amplitude=float(rng.uniform(0.015, 0.04)),
        bump_frequency=float(rng.integers(4, 9)),
        seed=seed,
        subdivisions=subdivisions,
    )


# default per-shape sample budget (near:uniform = 15:1 for the 3D set)
SAMPLES_3D = (3000, 200)
SAMPLES_2D = (600, 200)
SAMPLES_PARTIAL = (1200, 150)
NOISE_SIGMA = 0.05
CUT_FRACTION = 0.55


def build_corpus(n_shapes: int, seed: int, out_dir,
                 split=(16, 2, 6), subdivisions: int = 4,
                 cut_fraction: float = CUT_FRACTION) -> CorpusManifest:
    """Generate shapes, contours, and sample dumps with a manifest.

    Deterministic in seed: shape k derives its own seed stream, so the
    corpus is reproducible file for file.
    """
    if sum(split) != n_shapes:
        raise ToothfillError(f"split {split} does not sum to n_shapes={n_shapes}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).spawn(n_shapes)

    ids = [f"shape-{i:03d}" for i in range(n_shapes)]
    manifest = CorpusManifest(
        seed=seed, generator_version=GENERATOR_VERSION, root_dir=str(out_dir),
        split={"train": ids[:split[0]],
               "val": ids[split[0]:split[0] + split[1]],
               "test": ids[split[0] + split[1]:]})

    for i, shape_id in enumerate(ids):
        child = np.random.default_rng(seeds[i])
        spec_seed = int(child.integers(0, 2 ** 31))
        sample_seed = int(child.integers(0, 2 ** 31))
        spec = random_tooth_spec(spec_seed, subdivisions=subdivisions)

        full = generate_tooth(spec)
        crown = make_partial_crown(full, cut_fraction)
        contour = make_contour(full)

        shape_dir = out_dir / shape_id
        shape_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "full": f"{shape_id}/full.obj",
            "crown": f"{shape_id}/crown.obj",
            "contour": f"{shape_id}/contour.json",
            "full3d": f"{shape_id}/full3d.sdf1",
            "full2d": f"{shape_id}/full2d.sdf1",
            "partial3d": f"{shape_id}/partial3d.sdf1",
        }
        save_obj(out_dir / paths["full"], full)
        save_obj(out_dir / paths["crown"], crown)
        with open(out_dir / paths["contour"], "w", encoding="utf-8") as fh:
            json.dump([[float(x), float(y)] for x, y in contour.vertices], fh)

        p3, v3 = sample_sdf_3d_for_corpus(full, sample_seed)
        write_sdf_samples(out_dir / paths["full3d"], p3, v3)
        p2, v2 = sample_sdf_2d(contour, SAMPLES_2D[0], SAMPLES_2D[1], NOISE_SIGMA,
                               seed=sample_seed + 1)
        write_sdf_samples(out_dir / paths["full2d"], p2, v2)
        pp, vp = crown_supervision_samples(crown, SAMPLES_PARTIAL[0], SAMPLES_PARTIAL[1],
                                           NOISE_SIGMA, seed=sample_seed + 2)
        write_sdf_samples(out_dir / paths["partial3d"], pp, vp)

        manifest.shapes.append(ShapeRecord(shape_id, spec, paths))

    manifest.save(out_dir / "manifest.json")
    return manifest


def sample_sdf_3d_for_corpus(full: TriangleMesh, seed: int):
    from .geometry.sdf import sample_sdf_3d
    return sample_sdf_3d(full, SAMPLES_3D[0], SAMPLES_3D[1], NOISE_SIGMA, seed=seed)
