"""Surface sampling of triangle meshes into point clouds."""

from __future__ import annotations

import numpy as np

from insertsim.geom import PointCloud
from insertsim.scansim.surfaces import TriangleMesh


def sample_mesh(mesh: TriangleMesh, target_count: int, seed: int) -> PointCloud:
    """Area-weighted uniform surface sampling with per-triangle normals.

    Returns exactly `target_count` points; deterministic for a given seed.
    """
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    areas = mesh.triangle_areas()
    total = float(areas.sum())
    if total <= 0.0:
        raise ValueError("mesh has no sampleable area")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5A3D]))
    tri = rng.choice(len(areas), size=target_count, p=areas / total)
    a, b, c = mesh.triangle_corners()
    r1 = rng.random(target_count)
    r2 = rng.random(target_count)
    # square-root warp makes barycentric samples uniform over the triangle
    s1 = np.sqrt(r1)
    u = 1.0 - s1
    v = s1 * (1.0 - r2)
    w = s1 * r2
    pts = u[:, None] * a[tri] + v[:, None] * b[tri] + w[:, None] * c[tri]
    normals = mesh.triangle_normals()[tri]
    return PointCloud(pts, normals)
