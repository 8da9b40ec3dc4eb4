"""
Two-view geometry: RANSAC, pose recovery, triangulation
=======================================================

Generates exact correspondences from a known relative pose, contaminates
them with outliers, and walks the classic chain: essential matrix by
seeded RANSAC, cheirality-disambiguated pose, and point triangulation.
"""

import numpy as np

from darksfm.geometry import (
    Intrinsics,
    Pose,
    essential_from_pose,
    estimate_essential_ransac,
    fundamental_from_essential,
    project_points,
    recover_pose,
    triangulate,
)
from darksfm.matching import Correspondence, corr_arrays, symmetric_epipolar_distances
from darksfm.rotations import axis_angle_to_matrix, rotation_angle

rng = np.random.default_rng(21)
K = Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)

# ground truth: camera 2 rotated and shifted relative to camera 1
pose2 = Pose.from_rt(axis_angle_to_matrix([0.04, -0.09, 0.02]), np.array([1.0, 0.1, 0.0]))
points = np.column_stack(
    [rng.uniform(-2, 2, 120), rng.uniform(-1.5, 1.5, 120), rng.uniform(3, 7, 120)]
)
p1, _ = project_points(K, Pose(), points)
p2, _ = project_points(K, pose2, points)
matches = [Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i]), score=1.0) for i in range(120)]

# sprinkle 30% gross outliers
n_out = 36
outliers = [
    Correspondence(p1=tuple(rng.uniform(0, 640, 2)), p2=tuple(rng.uniform(0, 480, 2)))
    for _ in range(n_out)
]
contaminated = matches + outliers

E, inliers = estimate_essential_ransac(contaminated, K, K, threshold=2.0, seed=5)
print(f"RANSAC kept {int(inliers.sum())} of {len(contaminated)} matches")

# symmetric epipolar distance of the kept matches, in pixels
F = fundamental_from_essential(E, K, K)
q1, q2, _ = corr_arrays([m for m, keep in zip(contaminated, inliers) if keep])
sed = symmetric_epipolar_distances(q1, q2, F)
print(f"inlier SED: rms {np.sqrt(np.mean(sed**2)):.2e} px, max {sed.max():.2e} px")

pose_est, t_unit = recover_pose(E, [m for m, k in zip(contaminated, inliers) if k], K, K)
rot_err = rotation_angle(pose_est.rotation_matrix().T @ pose2.rotation_matrix())
gt_dir = pose2.translation / np.linalg.norm(pose2.translation)
est_dir = pose_est.translation / np.linalg.norm(pose_est.translation)
dir_err = np.arccos(np.clip(est_dir @ gt_dir, -1, 1))
print(f"rotation error {np.degrees(rot_err):.2e} deg, "
      f"translation direction error {np.degrees(dir_err):.2e} deg")
print("(scale is unobservable from two views; the translation is unit-norm)")

# triangulate one correspondence back into 3D; scale matches the unit baseline
X = triangulate(matches[0].p1, matches[0].p2, Pose(), pose_est, K, K)
X_gt_scaled = points[0] / np.linalg.norm(pose2.translation)
print(f"triangulated point error: {np.linalg.norm(X - X_gt_scaled):.2e}")

# the recovered pose reproduces the essential matrix up to scale and sign
E_re = essential_from_pose(pose_est)
relative = min(
    np.abs(E_re / np.linalg.norm(E_re) - E / np.linalg.norm(E)).max(),
    np.abs(E_re / np.linalg.norm(E_re) + E / np.linalg.norm(E)).max(),
)
print(f"essential recomposition residual: {relative:.2e}")
