"""Deterministic geometry kernel: meshes, exact SDFs, sampling, metrics."""

from .mesh import (
    TriangleMesh,
    NormalizationTransform,
    load_obj,
    save_obj,
    is_watertight,
    normalize_to_unit_ball,
    cross_section_loops,
)
from .sdf import (
    Polygon2D,
    signed_distance,
    winding_number,
    closest_point_on_mesh,
    sample_surface,
    sample_sdf_3d,
    contour_sdf,
    sample_sdf_2d,
    write_sdf_samples,
    read_sdf_samples,
    SDF_CLAMP,
)
from .arch import ArchCurve, fit_arch_curve, assign_contours
from .marching import marching_cubes
from .deform import laplacian_deform
from .metrics import (
    chamfer_distance,
    hausdorff_distance,
    average_surface_distance,
    point_mesh_distance,
)

__all__ = [
    "TriangleMesh",
    "NormalizationTransform",
    "Polygon2D",
    "ArchCurve",
    "SDF_CLAMP",
    "load_obj",
    "save_obj",
    "is_watertight",
    "normalize_to_unit_ball",
    "cross_section_loops",
    "signed_distance",
    "winding_number",
    "closest_point_on_mesh",
    "sample_surface",
    "sample_sdf_3d",
    "contour_sdf",
    "sample_sdf_2d",
    "write_sdf_samples",
    "read_sdf_samples",
    "fit_arch_curve",
    "assign_contours",
    "marching_cubes",
    "laplacian_deform",
    "chamfer_distance",
    "hausdorff_distance",
    "average_surface_distance",
    "point_mesh_distance",
]
