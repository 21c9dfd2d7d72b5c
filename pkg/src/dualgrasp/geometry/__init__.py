from .mesh import (
    MassProperties,
    MeshError,
    NotWatertightError,
    RayHit,
    SurfaceSample,
    TriangleMesh,
    load_mesh,
    mass_properties,
    contains_many,
    raycast,
    raycast_many,
    sample_surface,
    sample_surface_batch,
    validate_watertight,
)
from . import primitives

__all__ = [
    "MassProperties",
    "MeshError",
    "NotWatertightError",
    "RayHit",
    "SurfaceSample",
    "TriangleMesh",
    "load_mesh",
    "mass_properties",
    "primitives",
    "contains_many",
    "raycast",
    "raycast_many",
    "sample_surface",
    "sample_surface_batch",
    "validate_watertight",
]
