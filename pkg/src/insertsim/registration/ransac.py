"""Coarse registration: feature-correspondence RANSAC with an orientation prior.

Two hypothesis sources feed one inlier-count competition:

  - 3-point samples of the scan keypoints paired with descriptor nearest
    neighbors in the reference, solved by Kabsch (the classic prerejective
    flavor). Samples whose triangle edge lengths disagree between the clouds
    are rejected before the costly inlier count.
  - prior-orientation hypotheses: rotation fixed to q0, translation from a
    single sampled correspondence. On small near-symmetric parts (a plate
    with a hole barely off center) descriptors often prefer the flipped
    match, which the orientation gate must then reject; these hypotheses
    keep gate-compatible candidates in the stream regardless.

Hypotheses whose orientation already violates the rho_rot gate are skipped
before counting, so a flipped basin can never shadow the true one. The
returned transform maps the reference cloud into the scan frame.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from insertsim.geom import (
    PointCloud,
    Pose,
    quat_from_matrix,
    quat_distance,
    quat_to_matrix,
    transform_cloud,
)
from insertsim.registration.features import FeatureCloud
from insertsim.registration.params import InsufficientCorrespondencesError, RegistrationParams
from insertsim.registration.rigid import kabsch_transform

_EDGE_SIMILARITY = 0.9  # min/max edge-length ratio accepted by the prerejector
_DESC_KNN = 5           # correspondence candidates per scan keypoint


class RansacResult(NamedTuple):
    pose: Pose
    aligned_ref: PointCloud  # reference keypoints moved into the scan frame
    inlier_fraction: float


def _edge_lengths(pts: np.ndarray) -> np.ndarray:
    return np.array([
        np.linalg.norm(pts[0] - pts[1]),
        np.linalg.norm(pts[1] - pts[2]),
        np.linalg.norm(pts[2] - pts[0]),
    ])


def ransac_register(scan: FeatureCloud, ref: FeatureCloud,
                    params: RegistrationParams, seed: int) -> RansacResult:
    if len(scan) < 3 or len(ref) < 3:
        raise InsufficientCorrespondencesError(
            f"need >= 3 keypoints on both sides, got {len(scan)} / {len(ref)}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xAC]))
    scan_pts = scan.keypoints.points
    ref_pts = ref.keypoints.points
    n_scan = len(scan_pts)
    n_ref = len(ref_pts)

    # one-time descriptor correspondence candidates (scan -> k nearest ref)
    k = min(_DESC_KNN, n_ref)
    _, knn = cKDTree(ref.descriptors).query(scan.descriptors, k=k)
    knn = np.atleast_2d(np.asarray(knn, dtype=np.int64))
    if knn.shape[0] == 1 and n_scan > 1:
        knn = knn.T

    scan_tree = cKDTree(scan_pts)
    threshold = params.ransac_inlier_threshold
    min_edge = 3.0 * threshold
    R_prior = quat_to_matrix(params.q0)

    # sample the most distinctive keypoints: on plane-dominant scans the bulk
    # descriptors all look alike and their correspondences are noise
    deviation = np.linalg.norm(scan.descriptors - scan.descriptors.mean(axis=0), axis=1)
    pool_size = min(n_scan, max(40, n_scan // 10))
    pool = np.argsort(deviation, kind="stable")[-pool_size:]

    def count_inliers(R, t):
        moved = ref_pts @ R.T + t
        d, _ = scan_tree.query(moved, distance_upper_bound=threshold)
        return int(np.sum(np.isfinite(d)))

    best_count = -1
    best_Rt = None
    for it in range(params.ransac_iterations):
        if it % 2 == 0:
            # feature-triple hypothesis
            sample = pool[rng.choice(len(pool), size=3, replace=False)]
            ref_sample = knn[sample, rng.integers(0, k, size=3)]
            if len(set(ref_sample.tolist())) < 3:
                continue
            src = ref_pts[ref_sample]
            dst = scan_pts[sample]
            e_src = _edge_lengths(src)
            e_dst = _edge_lengths(dst)
            if np.any(e_dst < min_edge):
                continue  # tiny baselines give useless orientations
            longest = np.maximum(e_src, e_dst)
            if np.any(longest <= 0.0) or np.any(np.minimum(e_src, e_dst) / longest < _EDGE_SIMILARITY):
                continue
            area = 0.5 * np.linalg.norm(np.cross(dst[1] - dst[0], dst[2] - dst[0]))
            if area < 0.05 * float(np.max(e_dst)) ** 2:
                continue  # near-collinear, Kabsch is unstable
            R, t = kabsch_transform(src, dst)
        else:
            # prior-orientation hypothesis from one correspondence
            s = int(rng.integers(0, n_scan))
            if it % 4 == 1:
                r = int(knn[s, rng.integers(0, k)])
            else:
                r = int(rng.integers(0, n_ref))
            R = R_prior
            t = scan_pts[s] - R @ ref_pts[r]

        if quat_distance(quat_from_matrix(R), params.q0) >= params.rho_rot:
            continue  # already hopeless at the orientation gate
        count = count_inliers(R, t)
        if count > best_count:
            best_count = count
            best_Rt = (R, t)
            if count >= 0.9 * n_ref:
                break

    if best_Rt is None:
        # nothing scored (all samples prerejected); report a null alignment
        return RansacResult(Pose.identity(), ref.keypoints, 0.0)

    # polish the winner on its full inlier correspondence set
    R, t = best_Rt
    count = best_count
    moved = ref_pts @ R.T + t
    d, idx = scan_tree.query(moved, distance_upper_bound=threshold)
    inliers = np.isfinite(d)
    if inliers.sum() >= 3:
        R2, t2 = kabsch_transform(ref_pts[inliers], scan_pts[idx[inliers]])
        if quat_distance(quat_from_matrix(R2), params.q0) < params.rho_rot:
            refined_count = count_inliers(R2, t2)
            if refined_count >= best_count:
                R, t, count = R2, t2, refined_count

    pose = Pose(t, quat_from_matrix(R))
    return RansacResult(pose, transform_cloud(ref.keypoints, pose), count / n_ref)
