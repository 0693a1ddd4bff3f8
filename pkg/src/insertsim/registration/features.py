"""Normal estimation and 33-bin fast point feature histograms.

The descriptor follows the usual FPFH construction: per point, three Darboux
angle features over radius neighbors are histogrammed into 11 bins each
(simplified histograms, SPFH), then neighbor SPFHs are blended in with inverse
distance weights and each 11-bin block is normalized to sum 100. Features
depend only on relative geometry, so a rigidly moved cloud (with moved
normals) produces the same descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from insertsim.geom import PointCloud
from insertsim.registration.params import DegenerateFeatureError

BINS_PER_FEATURE = 11
DESCRIPTOR_SIZE = 3 * BINS_PER_FEATURE
MIN_NEIGHBORS = 5


@dataclass(frozen=True)
class FeatureCloud:
    keypoints: PointCloud
    descriptors: np.ndarray  # (N, 33), non-negative

    def __post_init__(self):
        if self.descriptors.shape != (len(self.keypoints), DESCRIPTOR_SIZE):
            raise ValueError("descriptor table must be (N, 33)")
        if not np.all(np.isfinite(self.descriptors)) or np.any(self.descriptors < 0):
            raise ValueError("descriptors must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.keypoints)


def estimate_normals(cloud: PointCloud, k: int = 10, viewpoint=(0.0, 0.0, 0.0)) -> PointCloud:
    """PCA normals over k nearest neighbors, oriented toward the viewpoint."""
    n = len(cloud)
    if n < 3:
        raise ValueError("need at least 3 points to estimate normals")
    k = min(k, n - 1)
    tree = cKDTree(cloud.points)
    _, idx = tree.query(cloud.points, k=k + 1)
    nbrs = cloud.points[idx]  # (N, k+1, 3), includes the point itself
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]  # eigenvector of the smallest eigenvalue
    to_view = np.asarray(viewpoint, dtype=np.float64) - cloud.points
    flip = np.einsum("ij,ij->i", normals, to_view) < 0.0
    normals = np.where(flip[:, None], -normals, normals)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(cloud.points, normals)


def _pair_features(p, n_p, q, n_q):
    """Darboux angle features (alpha, phi, theta) for source->target pairs."""
    d = q - p
    dist = np.linalg.norm(d, axis=1)
    d_hat = d / dist[:, None]
    u = n_p
    v = np.cross(d_hat, u)
    v_len = np.linalg.norm(v, axis=1)
    ok = v_len > 1e-12
    v = np.where(ok[:, None], v / np.where(ok[:, None], v_len[:, None], 1.0), 0.0)
    w = np.cross(u, v)
    alpha = np.einsum("ij,ij->i", v, n_q)
    phi = np.einsum("ij,ij->i", u, d_hat)
    theta = np.arctan2(np.einsum("ij,ij->i", w, n_q), np.einsum("ij,ij->i", u, n_q))
    return alpha, phi, theta, dist, ok


def _bin_index(values, lo, hi):
    scaled = (values - lo) / (hi - lo) * BINS_PER_FEATURE
    return np.clip(scaled.astype(np.int64), 0, BINS_PER_FEATURE - 1)


def compute_features(cloud: PointCloud, radius: float, normal_k: int = 10,
                     viewpoint=(0.0, 0.0, 0.0), _retry: bool = True) -> FeatureCloud:
    """FPFH-style descriptors over the given radius.

    Points with fewer than 5 neighbors inside the radius cannot be described;
    isolated stragglers are dropped, but if more than 10% of the cloud is
    degenerate the radius is wrong for this cloud and a
    DegenerateFeatureError is raised instead.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not cloud.has_normals:
        cloud = estimate_normals(cloud, k=normal_k, viewpoint=viewpoint)
    n = len(cloud)
    tree = cKDTree(cloud.points)
    neighbor_lists = tree.query_ball_point(cloud.points, r=radius)

    degenerate = [i for i, nbrs in enumerate(neighbor_lists) if len(nbrs) - 1 < MIN_NEIGHBORS]
    if degenerate:
        example = degenerate[0]
        found = len(neighbor_lists[example]) - 1
        if not _retry or len(degenerate) > max(1, n // 10):
            raise DegenerateFeatureError(
                f"{len(degenerate)} of {n} points have too few neighbors within "
                f"{radius} (e.g. point {example}: {found} < {MIN_NEIGHBORS})"
            )
        keep = np.ones(n, dtype=bool)
        keep[degenerate] = False
        return compute_features(cloud.select(keep), radius, normal_k, viewpoint, _retry=False)

    src_idx, tgt_idx = [], []
    for i, nbrs in enumerate(neighbor_lists):
        nbrs = [j for j in sorted(nbrs) if j != i]
        src_idx.extend([i] * len(nbrs))
        tgt_idx.extend(nbrs)
    src = np.array(src_idx, dtype=np.int64)
    tgt = np.array(tgt_idx, dtype=np.int64)

    alpha, phi, theta, dist, ok = _pair_features(
        cloud.points[src], cloud.normals[src], cloud.points[tgt], cloud.normals[tgt]
    )
    src, tgt, dist = src[ok], tgt[ok], dist[ok]
    cols = np.concatenate([
        _bin_index(alpha[ok], -1.0, 1.0),
        BINS_PER_FEATURE + _bin_index(phi[ok], -1.0, 1.0),
        2 * BINS_PER_FEATURE + _bin_index(theta[ok], -np.pi, np.pi),
    ])
    rows = np.concatenate([src, src, src])
    spfh = np.zeros((n, DESCRIPTOR_SIZE))
    np.add.at(spfh, (rows, cols), 1.0)

    # blend neighbor SPFHs with inverse-distance weights; the cap keeps
    # near-duplicate points from dominating the histogram
    inv_d = 1.0 / np.maximum(dist, 0.05 * radius)
    weighted = np.zeros((n, DESCRIPTOR_SIZE))
    np.add.at(weighted, src, spfh[tgt] * inv_d[:, None])
    neighbor_counts = np.zeros(n)
    np.add.at(neighbor_counts, src, 1.0)
    fpfh = spfh + weighted / neighbor_counts[:, None]

    # normalize each 11-bin block to sum 100
    for b in range(3):
        block = fpfh[:, b * BINS_PER_FEATURE:(b + 1) * BINS_PER_FEATURE]
        sums = block.sum(axis=1, keepdims=True)
        block /= np.where(sums > 0, sums, 1.0)
        block *= 100.0
    return FeatureCloud(cloud, fpfh)
