"""Two-view geometry tests: RANSAC essential estimation, pose recovery,
triangulation, and the essential-manifold invariants."""

import numpy as np
import pytest

from darksfm.errors import (
    AmbiguousPoseError,
    DegenerateGeometryError,
    InsufficientDataError,
    LowParallaxError,
)
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

K = Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


def two_view_scene(seed=0, n=100, behind=False):
    """Exact correspondences from a known relative pose.

    Camera 1 is the world frame; camera 2 is rotated and translated.
    Returns (matches, pose2, points).
    """
    rng = np.random.default_rng(seed)
    R = axis_angle_to_matrix(np.array([0.05, -0.12, 0.04]))
    center = np.array([1.0, 0.2, -0.1])
    pose2 = Pose.from_rt(R, center)
    z_range = (-6.0, -3.0) if behind else (3.0, 6.0)
    points = np.column_stack(
        [
            rng.uniform(-2.0, 2.0, n),
            rng.uniform(-1.5, 1.5, n),
            rng.uniform(*z_range, n),
        ]
    )
    p1, _ = project_points(K, Pose(), points)
    p2, _ = project_points(K, pose2, points)
    matches = [
        Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i]), score=1.0) for i in range(n)
    ]
    return matches, pose2, points


def add_outliers(matches, n_out, seed, min_sed=6.0):
    """Uniform outliers rejection-sampled away from the true epipolar geometry."""
    rng = np.random.default_rng(seed)
    _, pose2, _ = two_view_scene()
    F = fundamental_from_essential(essential_from_pose(pose2), K, K)
    out = []
    while len(out) < n_out:
        p1 = rng.uniform([0, 0], [640, 480])
        p2 = rng.uniform([0, 0], [640, 480])
        sed = symmetric_epipolar_distances(p1[None], p2[None], F)[0]
        if sed > min_sed:
            out.append(Correspondence(p1=tuple(p1), p2=tuple(p2), score=0.1))
    return list(matches) + out


class TestEstimateEssentialRansac:
    def test_exact_scene_all_inliers_with_tiny_sed(self):
        matches, pose2, _ = two_view_scene()
        E, mask = estimate_essential_ransac(matches, K, K, threshold=2.0, seed=1)
        assert mask.all()
        F = fundamental_from_essential(E, K, K)
        p1, p2, _ = corr_arrays(matches)
        sed = symmetric_epipolar_distances(p1, p2, F)
        assert np.sqrt(np.mean(sed**2)) < 1e-6

    def test_outliers_rejected_to_ground_truth_labels(self):
        matches, _, _ = two_view_scene()
        contaminated = add_outliers(matches, 30, seed=5)
        E, mask = estimate_essential_ransac(contaminated, K, K, threshold=2.0, seed=2)
        expected = np.zeros(len(contaminated), dtype=bool)
        expected[: len(matches)] = True
        np.testing.assert_array_equal(mask, expected)

    def test_essential_manifold_identities(self):
        matches, _, _ = two_view_scene(seed=3)
        E, _ = estimate_essential_ransac(matches, K, K, seed=3)
        assert abs(np.linalg.det(E)) < 1e-8
        identity = 2.0 * E @ E.T @ E - np.trace(E @ E.T) * E
        assert np.abs(identity).max() < 1e-8

    def test_pure_rotation_flagged_degenerate(self):
        rng = np.random.default_rng(11)
        R = axis_angle_to_matrix(np.array([0.0, 0.3, 0.0]))
        points = np.column_stack(
            [rng.uniform(-2, 2, 60), rng.uniform(-1.5, 1.5, 60), rng.uniform(3, 6, 60)]
        )
        p1, _ = project_points(K, Pose(), points)
        p2, _ = project_points(K, Pose.from_rt(R, np.zeros(3)), points)
        matches = [
            Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i])) for i in range(60)
        ]
        with pytest.raises(DegenerateGeometryError):
            estimate_essential_ransac(matches, K, K, seed=4)

    def test_deterministic_for_fixed_seed(self):
        matches, _, _ = two_view_scene(seed=6)
        contaminated = add_outliers(matches, 20, seed=7)
        E1, m1 = estimate_essential_ransac(contaminated, K, K, seed=9)
        E2, m2 = estimate_essential_ransac(contaminated, K, K, seed=9)
        np.testing.assert_array_equal(E1, E2)
        np.testing.assert_array_equal(m1, m2)

    def test_too_few_matches_rejected(self):
        matches, _, _ = two_view_scene(n=7)
        with pytest.raises(InsufficientDataError):
            estimate_essential_ransac(matches, K, K)


class TestRecoverPose:
    def test_exact_scene_recovers_rotation_and_direction(self):
        matches, pose2, _ = two_view_scene(seed=1)
        E = essential_from_pose(pose2)
        pose, t_unit = recover_pose(E, matches, K, K)
        # rotation error as an angle
        dR = pose.rotation_matrix().T @ pose2.rotation_matrix()
        assert rotation_angle(dR) < 1e-6
        # translation direction error (scale is unobservable)
        gt_dir = pose2.translation / np.linalg.norm(pose2.translation)
        est_dir = pose.translation / np.linalg.norm(pose.translation)
        assert np.arccos(np.clip(est_dir @ gt_dir, -1, 1)) < 1e-6
        assert abs(np.linalg.norm(t_unit) - 1.0) < 1e-12

    def test_textbook_sideways_translation(self):
        pose2 = Pose.from_rt(np.eye(3), np.array([1.0, 0.0, 0.0]))
        rng = np.random.default_rng(2)
        points = np.column_stack(
            [rng.uniform(-1, 2, 40), rng.uniform(-1, 1, 40), rng.uniform(3, 5, 40)]
        )
        p1, _ = project_points(K, Pose(), points)
        p2, _ = project_points(K, pose2, points)
        matches = [Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i])) for i in range(40)]
        pose, _ = recover_pose(essential_from_pose(pose2), matches, K, K)
        assert rotation_angle(pose.rotation_matrix()) < 1e-9
        est_dir = pose.translation / np.linalg.norm(pose.translation)
        np.testing.assert_allclose(est_dir, [1.0, 0.0, 0.0], atol=1e-9)

    def test_recomposing_essential_reproduces_input(self):
        matches, pose2, _ = two_view_scene(seed=4)
        E = essential_from_pose(pose2)
        E /= np.linalg.norm(E)
        pose, _ = recover_pose(E, matches, K, K)
        E_re = essential_from_pose(pose)
        E_re /= np.linalg.norm(E_re)
        err = min(np.abs(E_re - E).max(), np.abs(E_re + E).max())
        assert err < 1e-6

    def test_points_split_front_behind_is_ambiguous(self):
        # points behind camera 2 but in front of camera 1: no candidate
        # can place them in front of both, so cheirality cannot decide
        rng = np.random.default_rng(3)
        pose2 = Pose.from_rt(np.eye(3), np.array([0.0, 0.0, 5.0]))
        points = np.column_stack(
            [rng.uniform(-1, 1, 30), rng.uniform(-1, 1, 30), rng.uniform(2, 4, 30)]
        )
        p1, _ = project_points(K, Pose(), points)
        p2, _ = project_points(K, pose2, points)
        matches = [Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i])) for i in range(30)]
        with pytest.raises(AmbiguousPoseError):
            recover_pose(essential_from_pose(pose2), matches, K, K)


class TestTriangulate:
    def test_converging_cameras_exact_intersection(self):
        # both optical axes pass through the target point
        target = np.array([0.0, 0.0, 0.0])
        pose1 = Pose.from_rt(axis_angle_to_matrix(np.zeros(3)), np.array([0.0, 0.0, -4.0]))
        # camera 2 to the side, rotated to look at the target
        angle = np.arctan2(3.0, 4.0)
        pose2 = Pose.from_rt(
            axis_angle_to_matrix(np.array([0.0, -angle, 0.0])), np.array([-3.0, 0.0, -4.0])
        )
        p1, _ = project_points(K, pose1, target[None])
        p2, _ = project_points(K, pose2, target[None])
        X = triangulate(tuple(p1[0]), tuple(p2[0]), pose1, pose2, K, K)
        np.testing.assert_allclose(X, target, atol=1e-9)

    def test_random_point_reprojects_exactly(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            pose1 = Pose.from_rt(
                axis_angle_to_matrix(rng.normal(0, 0.2, 3)), rng.normal(0, 1, 3)
            )
            pose2 = Pose.from_rt(
                axis_angle_to_matrix(rng.normal(0, 0.2, 3)),
                pose1.translation + rng.normal(0, 1, 3) + [2, 0, 0],
            )
            X_gt = 0.5 * (pose1.translation + pose2.translation) + [0.0, 0.0, 6.0]
            p1, z1 = project_points(K, pose1, X_gt[None])
            p2, z2 = project_points(K, pose2, X_gt[None])
            if z1[0] < 0.5 or z2[0] < 0.5:
                continue
            X = triangulate(tuple(p1[0]), tuple(p2[0]), pose1, pose2, K, K)
            r1, _ = project_points(K, pose1, X[None])
            r2, _ = project_points(K, pose2, X[None])
            assert np.linalg.norm(r1[0] - p1[0]) < 1e-9
            assert np.linalg.norm(r2[0] - p2[0]) < 1e-9

    def test_identical_poses_rejected(self):
        pose = Pose.from_rt(np.eye(3), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(LowParallaxError):
            triangulate((100.0, 100.0), (120.0, 110.0), pose, pose.copy(), K, K)

    def test_parallel_rays_rejected(self):
        # same viewing direction from laterally offset cameras, same pixel
        pose1 = Pose()
        pose2 = Pose.from_rt(np.eye(3), np.array([1.0, 0.0, 0.0]))
        with pytest.raises(LowParallaxError):
            triangulate((K.cx, K.cy), (K.cx, K.cy), pose1, pose2, K, K)

    def test_equivariant_under_rigid_transform(self):
        rng = np.random.default_rng(12)
        pose1 = Pose()
        pose2 = Pose.from_rt(axis_angle_to_matrix([0.0, 0.1, 0.0]), np.array([1.5, 0.0, 0.0]))
        X_gt = np.array([0.3, -0.2, 5.0])
        p1, _ = project_points(K, pose1, X_gt[None])
        p2, _ = project_points(K, pose2, X_gt[None])
        T = Pose.from_rt(axis_angle_to_matrix(rng.normal(0, 0.5, 3)), rng.normal(0, 2, 3))
        X_plain = triangulate(tuple(p1[0]), tuple(p2[0]), pose1, pose2, K, K)
        X_moved = triangulate(
            tuple(p1[0]), tuple(p2[0]), T.compose(pose1), T.compose(pose2), K, K
        )
        expected = T.rotation_matrix() @ X_plain + T.translation
        np.testing.assert_allclose(X_moved, expected, atol=1e-9)
