"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines. Every tolerance is pinned here; nothing is deferred to later
calibration.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from darksfm import formats
from darksfm.adaptation import FeatureBundle, distill_loss
from darksfm.cli import run as cli_run
from darksfm.evaluation import (
    DepthPair,
    Trajectory,
    align_sim3,
    ate,
    depth_metrics,
    psnr,
    rpe,
)
from darksfm.geometry import (
    Intrinsics,
    Pose,
    essential_from_pose,
    estimate_essential_ransac,
    fundamental_from_essential,
    project_points,
    recover_pose,
)
from darksfm.global_recon import (
    SolverOptions,
    bundle_adjust,
    coarse_align,
    reprojection_residuals_and_jacobians,
    apply_camera_update,
)
from darksfm.matching import (
    Correspondence,
    corr_arrays,
    symmetric_epipolar_distance,
    symmetric_epipolar_distances,
)
from darksfm.noise_model import MeanVarSample, NoiseParams, calibrate, synthesize
from darksfm.raw_pipeline import FULL_SCALE, LinearImage, measure_snr
from darksfm.rotations import axis_angle_to_matrix, rotation_angle
from darksfm.scene_graph import build_graph, pairwise_similarity
from darksfm.synthetic import (
    all_edges,
    edge_matches,
    exact_reconstruction,
    feature_map_for_view,
    jittered_projections,
    make_ring_scene,
    natural_test_image,
    pointmap_for_view,
    write_fixture,
)


@contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"[criterion {number:02d}] {name}: FAIL")
        raise
    print(f"[criterion {number:02d}] {name}: PASS")


def test_criterion_01_noise_calibration():
    with criterion(1, "noise calibration recovers (a, b) within 2%"):
        rng = np.random.default_rng(101)
        a_true, b_true = 0.5, 1.0
        samples = []
        for channel in range(3):
            means = rng.uniform(0.0, 20.0, 10_000)
            variances = (a_true * means + b_true) * (
                1.0 + 0.01 * rng.standard_normal(10_000)
            )
            samples.extend(
                MeanVarSample(channel=channel, mean=float(m), variance=float(max(v, 0)))
                for m, v in zip(means, variances)
            )
        start = time.perf_counter()
        params = calibrate(samples)
        elapsed = time.perf_counter() - start
        for c in range(3):
            assert abs(params.a[c] - a_true) / a_true < 0.02
            assert abs(params.b[c] - b_true) / b_true < 0.02
        assert elapsed < 1.0, f"calibration took {elapsed:.2f}s"


def test_criterion_02_snr_targeting():
    with criterion(2, "synthesis hits SNR targets -1..-7 dB within 0.5 dB"):
        clean = natural_test_image(width=512, height=352, seed=7)
        params = NoiseParams(a=[0.5, 0.5, 0.5], b=[30.0, 30.0, 30.0])
        start = time.perf_counter()
        for target in (-1.0, -3.0, -5.0, -7.0):
            noisy, scale = synthesize(clean, params, target_snr_db=target, seed=17)
            scaled = LinearImage.from_array(scale * clean.data)
            measured = measure_snr(noisy, scaled)
            assert abs(measured - target) < 0.5, f"target {target}: got {measured:.3f}"
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"synthesis took {elapsed:.2f}s"


def _two_view_case(seed, n=100):
    rng = np.random.default_rng(seed)
    k = Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)
    pose2 = Pose.from_rt(
        axis_angle_to_matrix(np.array([0.06, -0.1, 0.03])), np.array([1.0, 0.15, -0.1])
    )
    points = np.column_stack(
        [rng.uniform(-2, 2, n), rng.uniform(-1.5, 1.5, n), rng.uniform(3, 6, n)]
    )
    p1, _ = project_points(k, Pose(), points)
    p2, _ = project_points(k, pose2, points)
    matches = [Correspondence(p1=tuple(p1[i]), p2=tuple(p2[i]), score=1.0) for i in range(n)]
    return k, pose2, matches


def test_criterion_03_two_view_geometry():
    with criterion(3, "RANSAC separates labeled outliers; pose within 0.01 deg"):
        k, pose2, inlier_matches = _two_view_case(seed=301)
        rng = np.random.default_rng(302)
        F_true = fundamental_from_essential(essential_from_pose(pose2), k, k)
        outliers = []
        while len(outliers) < 30:
            q1 = rng.uniform([0, 0], [640, 480])
            q2 = rng.uniform([0, 0], [640, 480])
            if symmetric_epipolar_distances(q1[None], q2[None], F_true)[0] > 6.0:
                outliers.append(Correspondence(p1=tuple(q1), p2=tuple(q2), score=0.0))
        contaminated = inlier_matches + outliers
        start = time.perf_counter()
        E, mask = estimate_essential_ransac(
            contaminated, k, k, threshold=2.0, seed=303, max_iters=1000
        )
        expected = np.zeros(len(contaminated), dtype=bool)
        expected[: len(inlier_matches)] = True
        np.testing.assert_array_equal(mask, expected)
        kept = [m for m, good in zip(contaminated, mask) if good]
        pose_est, _ = recover_pose(E, kept, k, k)
        elapsed = time.perf_counter() - start
        rot_err = math.degrees(
            rotation_angle(pose_est.rotation_matrix().T @ pose2.rotation_matrix())
        )
        dir_gt = pose2.translation / np.linalg.norm(pose2.translation)
        dir_est = pose_est.translation / np.linalg.norm(pose_est.translation)
        dir_err = math.degrees(np.arccos(np.clip(dir_est @ dir_gt, -1, 1)))
        assert rot_err < 0.01, f"rotation error {rot_err:.2e} deg"
        assert dir_err < 0.01, f"direction error {dir_err:.2e} deg"
        assert elapsed < 1.0, f"two-view solve took {elapsed:.2f}s"


def test_criterion_04_sed_oracle():
    with criterion(4, "SED matches two-line-distance oracle within 1e-10"):
        rng = np.random.default_rng(401)

        def point_line_distance(point, line):
            norm = math.hypot(line[0], line[1])
            if norm == 0:
                return math.inf
            return abs(line[0] * point[0] + line[1] * point[1] + line[2]) / norm

        for _ in range(1000):
            F = rng.standard_normal((3, 3))
            c = Correspondence(
                p1=tuple(rng.uniform(0, 640, 2)), p2=tuple(rng.uniform(0, 480, 2))
            )
            got = symmetric_epipolar_distance(c, F)
            l2 = F @ np.array([c.p1[0], c.p1[1], 1.0])
            l1 = F.T @ np.array([c.p2[0], c.p2[1], 1.0])
            expected = 0.5 * (point_line_distance(c.p1, l1) + point_line_distance(c.p2, l2))
            assert abs(got - expected) < 1e-10


def _run_full_sfm(scene, projections=None, lambda_intr=10.0):
    features = [feature_map_for_view(scene, c) for c in range(scene.n_cameras)]
    graph = build_graph(pairwise_similarity(features), k=10, names=scene.view_names())
    pm = [pointmap_for_view(scene, c) for c in range(scene.n_cameras)]
    pointmaps, matches = {}, {}
    for e in sorted(graph.edges):
        corr = edge_matches(scene, *e, projections=projections)
        if corr:
            matches[e] = corr
            pointmaps[e] = (pm[e[0]], pm[e[1]])
    recon = coarse_align(
        graph, pointmaps, matches, intrinsics=[scene.intrinsics] * scene.n_cameras
    )
    result = bundle_adjust(
        recon, calibrated=[scene.intrinsics] * scene.n_cameras, lambda_intr=lambda_intr
    )
    est = Trajectory(names=scene.view_names(), poses=result.reconstruction.poses)
    gt = Trajectory(names=scene.view_names(), poses=scene.poses)
    _, aligned = align_sim3(est, gt)
    return ate(aligned, gt), rpe(aligned, gt)


def test_criterion_05_full_sfm():
    with criterion(5, "full SfM: exact < 1e-6 diam; 1 px noise < 1% diam, rot < 0.5 deg"):
        scene = make_ring_scene(n_cameras=10, n_points=500, seed=0)
        diam = scene.diameter()
        start = time.perf_counter()
        ate_exact, _ = _run_full_sfm(scene)
        assert ate_exact < 1e-6 * diam, f"exact ATE {ate_exact:.2e} vs diam {diam:.2f}"
        # calibration is exact for the fixture, so the intrinsics prior is strong
        noisy = jittered_projections(scene, sigma=1.0, seed=505)
        ate_noisy, (rpe_t, rpe_r) = _run_full_sfm(
            scene, projections=noisy, lambda_intr=1e6
        )
        elapsed = time.perf_counter() - start
        assert ate_noisy < 0.01 * diam, f"noisy ATE {ate_noisy:.3e} vs 1% diam"
        assert rpe_r < 0.5, f"noisy RPE rot {rpe_r:.3f} deg"
        assert elapsed < 30.0, f"full SfM took {elapsed:.1f}s"


def test_criterion_06_bundle_adjustment():
    with criterion(6, "BA objective non-increasing x100; Jacobians vs FD 1e-5 x20"):
        for trial in range(100):
            scene = make_ring_scene(
                n_cameras=5, n_points=25, width=96, height=72, focal=100.0, seed=600 + trial
            )
            rng = np.random.default_rng(9000 + trial)
            recon = exact_reconstruction(scene)
            recon.obs_xy = recon.obs_xy + rng.normal(0, 0.5, recon.obs_xy.shape)
            for i in range(1, recon.n_cameras):
                dR = axis_angle_to_matrix(rng.normal(0, np.deg2rad(2.0), 3))
                p = recon.poses[i]
                recon.poses[i] = Pose.from_rt(
                    dR @ p.rotation_matrix(), p.translation + rng.normal(0, 0.1, 3)
                )
            recon.points = recon.points + rng.normal(0, 0.05, recon.points.shape)
            result = bundle_adjust(
                recon,
                calibrated=[scene.intrinsics] * scene.n_cameras,
                opts=SolverOptions(max_iters=6),
            )
            hist = result.objective_history
            assert all(b <= a for a, b in zip(hist, hist[1:])), f"trial {trial}"

        for trial in range(20):
            scene = make_ring_scene(
                n_cameras=4, n_points=12, width=96, height=72, focal=100.0, seed=700 + trial
            )
            rng = np.random.default_rng(9500 + trial)
            recon = exact_reconstruction(scene)
            for i in range(recon.n_cameras):
                dR = axis_angle_to_matrix(rng.normal(0, 0.05, 3))
                p = recon.poses[i]
                recon.poses[i] = Pose.from_rt(
                    dR @ p.rotation_matrix(), p.translation + rng.normal(0, 0.1, 3)
                )
            recon.points = recon.points + rng.normal(0, 0.1, recon.points.shape)
            poses, intr, points = recon.poses, list(recon.intrinsics), recon.points
            _, j_cam, j_pt = reprojection_residuals_and_jacobians(
                poses, intr, points, recon.obs_cam, recon.obs_point, recon.obs_xy
            )

            def residuals(poses_, intr_, points_):
                r, _, _ = reprojection_residuals_and_jacobians(
                    poses_, intr_, points_, recon.obs_cam, recon.obs_point, recon.obs_xy
                )
                return r

            h = 1e-6
            c = int(rng.integers(recon.n_cameras))
            for kk in range(10):
                delta = np.zeros(10)
                delta[kk] = h
                p_up, k_up = apply_camera_update(poses[c], intr[c], delta)
                p_dn, k_dn = apply_camera_update(poses[c], intr[c], -delta)
                up = residuals(
                    [p_up if i == c else p for i, p in enumerate(poses)],
                    [k_up if i == c else q for i, q in enumerate(intr)],
                    points,
                )
                dn = residuals(
                    [p_dn if i == c else p for i, p in enumerate(poses)],
                    [k_dn if i == c else q for i, q in enumerate(intr)],
                    points,
                )
                fd = (up - dn) / (2 * h)
                sel = recon.obs_cam == c
                rel = np.abs(fd[sel] - j_cam[sel, :, kk]) / (np.abs(j_cam[sel, :, kk]) + 1.0)
                assert rel.max() < 1e-5, f"trial {trial} cam param {kk}"
            p_idx = int(rng.integers(recon.n_points))
            for kk in range(3):
                dp = np.zeros(3)
                dp[kk] = h
                bump = (np.arange(recon.n_points) == p_idx)[:, None] * dp
                fd = (residuals(poses, intr, points + bump) - residuals(poses, intr, points - bump)) / (2 * h)
                sel = recon.obs_point == p_idx
                rel = np.abs(fd[sel] - j_pt[sel, :, kk]) / (np.abs(j_pt[sel, :, kk]) + 1.0)
                assert rel.max() < 1e-5, f"trial {trial} point param {kk}"


def test_criterion_07_distillation_loss():
    with criterion(7, "distillation loss arithmetic, oracle, and gradient"):
        # engineered terms: noisy = 1.0, clean = 2.0, weight 0.3 -> total 1.6
        def zero_bundle():
            return FeatureBundle(
                encoder=np.zeros((2, 2, 2, 3)),
                decoder=np.zeros((2, 2, 2, 3)),
                correspondence=np.zeros((2, 2, 2, 3)),
            )

        teacher = zero_bundle()
        noisy = zero_bundle()
        noisy.encoder[0, 0, 0, 0] = 1.0
        clean = zero_bundle()
        clean.correspondence[1, 0, 1, 0] = 1.0
        clean.correspondence[1, 0, 1, 2] = 1.0
        loss = distill_loss(teacher, noisy, clean, lambda_clean=0.3)
        assert loss.noisy == 1.0 and loss.clean == 2.0
        assert abs(loss.total - 1.6) < 1e-15

        rng = np.random.default_rng(701)

        def rand_bundle():
            return FeatureBundle(
                encoder=rng.standard_normal((2, 3, 4, 5)),
                decoder=rng.standard_normal((2, 3, 4, 6)),
                correspondence=rng.standard_normal((2, 3, 4, 7)),
            )

        t, sn, sc = rand_bundle(), rand_bundle(), rand_bundle()
        loss = distill_loss(t, sn, sc, lambda_clean=0.3)
        oracle_noisy = sum(
            float((x - y) ** 2)
            for ta, tb in zip(t.tensors(), sn.tensors())
            for x, y in zip(ta.ravel(), tb.ravel())
        )
        oracle_clean = sum(
            float((x - y) ** 2)
            for ta, tb in zip(t.tensors(), sc.tensors())
            for x, y in zip(ta.ravel(), tb.ravel())
        )
        assert abs(loss.noisy - oracle_noisy) / oracle_noisy < 1e-6
        assert abs(loss.clean - oracle_clean) / oracle_clean < 1e-6
        total = oracle_noisy + 0.3 * oracle_clean
        assert abs(loss.total - total) / total < 1e-6

        h = 1e-5
        for _ in range(5):
            v, y, x, d = (int(rng.integers(2)), int(rng.integers(3)), int(rng.integers(4)), int(rng.integers(5)))
            analytic = 2.0 * (sn.encoder[v, y, x, d] - t.encoder[v, y, x, d])
            sn.encoder[v, y, x, d] += h
            up = distill_loss(t, sn, sc, 0.3).total
            sn.encoder[v, y, x, d] -= 2 * h
            down = distill_loss(t, sn, sc, 0.3).total
            sn.encoder[v, y, x, d] += h
            assert abs((up - down) / (2 * h) - analytic) < 1e-6


def _random_pose(rng):
    return Pose.from_rt(axis_angle_to_matrix(rng.normal(0, 0.5, 3)), rng.normal(0, 3, 3))


def test_criterion_08_metric_suite():
    with criterion(8, "metrics match brute-force oracles within 1e-10 x100"):
        rng = np.random.default_rng(801)
        for _ in range(100):
            n = int(rng.integers(4, 9))
            names = [f"f{i}" for i in range(n)]
            ref = Trajectory(names=names, poses=[_random_pose(rng) for _ in range(n)])
            est = Trajectory(names=names, poses=[_random_pose(rng) for _ in range(n)])

            got_ate = ate(est, ref)
            acc = sum(
                float(np.sum((e.translation - r.translation) ** 2))
                for e, r in zip(est.poses, ref.poses)
            )
            assert abs(got_ate - math.sqrt(acc / n)) < 1e-10

            got_t, got_r = rpe(est, ref)
            t_list, r_list = [], []
            for i in range(n - 1):
                d_ref = np.linalg.inv(ref.poses[i].matrix()) @ ref.poses[i + 1].matrix()
                d_est = np.linalg.inv(est.poses[i].matrix()) @ est.poses[i + 1].matrix()
                delta = np.linalg.inv(d_ref) @ d_est
                t_list.append(float(np.linalg.norm(delta[:3, 3])))
                r_list.append(math.degrees(rotation_angle(delta[:3, :3])))
            assert abs(got_t - math.sqrt(np.mean(np.square(t_list)))) < 1e-10
            assert abs(got_r - math.sqrt(np.mean(np.square(r_list)))) < 1e-10

            depth_ref = rng.uniform(1.0, 5.0, (8, 8))
            depth_pred = depth_ref * rng.uniform(0.8, 1.6, (8, 8))
            absrel, delta125 = depth_metrics(
                DepthPair(predicted=depth_pred, reference=depth_ref)
            )
            o_absrel = np.mean(
                [abs(p - r) / r for p, r in zip(depth_pred.ravel(), depth_ref.ravel())]
            )
            o_delta = np.mean(
                [max(p / r, r / p) < 1.25 for p, r in zip(depth_pred.ravel(), depth_ref.ravel())]
            )
            assert abs(absrel - o_absrel) < 1e-10
            assert abs(delta125 - o_delta) < 1e-10

            a = rng.random((3, 6, 6))
            b = rng.random((3, 6, 6))
            got = psnr(LinearImage.from_array(a), LinearImage.from_array(b), peak=1.0)
            mse = np.mean([(x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())])
            assert abs(got - 10 * math.log10(1.0 / mse)) < 1e-10

        # strict boundary: ratio exactly 1.25 is not within the threshold
        ref_int = np.arange(1.0, 26.0).reshape(5, 5)
        _, delta125 = depth_metrics(DepthPair(predicted=1.25 * ref_int, reference=ref_int))
        assert delta125 == 0.0


@pytest.fixture(scope="module")
def cli_fixture(tmp_path_factory):
    scene = make_ring_scene(n_cameras=4, n_points=60, seed=42)
    root = tmp_path_factory.mktemp("accept_fixture")
    write_fixture(root, scene, seed=42)
    clean = natural_test_image(width=96, height=64, seed=5)
    formats.write_image(
        root / "clean.drkimg", LinearImage.from_array(clean.data / FULL_SCALE)
    )
    formats.write_noise_params(
        root / "noise.txt", NoiseParams(a=[0.4] * 3, b=[20.0] * 3)
    )
    rows = [
        (c, float(m), float((0.5 + 0.1 * c) * m + 1.0))
        for c in range(3)
        for m in np.linspace(1, 40, 30)
    ]
    formats.write_mean_var_csv(root / "samples.csv", rows)
    from darksfm.raw_pipeline import RawImage

    rng = np.random.default_rng(6)
    raw = RawImage(
        width=32,
        height=24,
        cfa_pattern="RGGB",
        data=rng.integers(300, 9000, (24, 32)).astype(np.uint16),
        black_level=np.full(4, 256.0),
        white_level=FULL_SCALE,
    )
    formats.write_raw(root / "frame.drkraw", raw)
    for offset, name in enumerate(("teacher", "noisy", "clean_student")):
        bundle = FeatureBundle(
            encoder=np.random.default_rng(900 + offset).standard_normal((2, 2, 3, 4)).astype(np.float32),
            decoder=np.random.default_rng(910 + offset).standard_normal((2, 2, 3, 5)).astype(np.float32),
            correspondence=np.random.default_rng(920 + offset).standard_normal((2, 2, 3, 6)).astype(np.float32),
        )
        formats.write_feature_bundle(root / name, bundle)
    return root


def _invoke(argv, capsys):
    code = cli_run(argv)
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return captured.out


def test_criterion_09_cli_determinism(cli_fixture, tmp_path, capsys):
    with criterion(9, "seeded CLI runs bit-identical across repeats and threads"):
        root = cli_fixture
        gt = str(root / "gt_poses.txt")

        def outputs_for(tag, threads):
            out_dir = tmp_path / tag
            out_dir.mkdir()
            reports = {}
            reports["calibrate-noise"] = _invoke(
                ["calibrate-noise", "--samples", str(root / "samples.csv"),
                 "--out", str(out_dir / "params.txt"), "--threads", threads],
                capsys,
            )
            reports["simulate"] = _invoke(
                ["simulate", "--clean", str(root / "clean.drkimg"),
                 "--params", str(root / "noise.txt"), "--snr-db", "-4",
                 "--seed", "11", "--out", str(out_dir / "noisy.drkimg"),
                 "--threads", threads],
                capsys,
            )
            reports["isp"] = _invoke(
                ["isp", "--input", str(root / "frame.drkraw"),
                 "--output", str(out_dir / "preview.png"), "--threads", threads],
                capsys,
            )
            reports["sfm"] = _invoke(
                ["sfm", "--images", str(root / "images"),
                 "--features", str(root / "features"),
                 "--matches", str(root / "matches"),
                 "--pointmaps", str(root / "pointmaps"),
                 "--intrinsics", str(root / "intrinsics.txt"),
                 "--out", str(out_dir / "poses.txt"),
                 "--points", str(out_dir / "cloud.ply"),
                 "--subsample", "1", "--seed", "11",
                 "--max-iters", "8", "--threads", threads],
                capsys,
            )
            reports["eval-poses"] = _invoke(
                ["eval-poses", "--est", str(out_dir / "poses.txt"), "--ref", gt,
                 "--threads", threads],
                capsys,
            )
            reports["eval-depth"] = _invoke(
                ["eval-depth", "--pred", str(root / "clean.drkimg"),
                 "--ref", str(root / "clean.drkimg"), "--threads", threads],
                capsys,
            )
            reports["distill-loss"] = _invoke(
                ["distill-loss", "--teacher", str(root / "teacher"),
                 "--student-noisy", str(root / "noisy"),
                 "--student-clean", str(root / "clean_student"),
                 "--threads", threads],
                capsys,
            )
            files = {
                p.name: p.read_bytes() for p in sorted(out_dir.iterdir())
            }
            return reports, files

        rep_a, files_a = outputs_for("run_a", "1")
        rep_b, files_b = outputs_for("run_b", "1")
        rep_c, files_c = outputs_for("run_c", "8")
        for key in rep_a:
            ra, rb, rc = (json.loads(r[key]) for r in (rep_a, rep_b, rep_c))
            for r in (ra, rb, rc):
                r.pop("out", None), r.pop("output", None), r.pop("points", None)
            assert ra == rb == rc, f"report for {key} differs"
        assert files_a == files_b == files_c


def test_criterion_10_format_round_trips(tmp_path):
    with criterion(10, "DRKIMG/DRKFTR/DRKPTS round-trip bit-exactly"):
        rng = np.random.default_rng(1001)
        for trial in range(20):
            h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
            img_payload = rng.standard_normal((3, h, w)).astype(np.float32)
            p = tmp_path / f"img{trial}.drkimg"
            formats.write_image(p, LinearImage.from_array(img_payload))
            back = formats.read_image(p)
            assert np.array_equal(back.data.astype(np.float32), img_payload)

            d = int(rng.integers(1, 9))
            ftr_payload = rng.standard_normal((h, w, d)).astype(np.float32)
            conf = rng.random((h, w)).astype(np.float32) if trial % 2 else None
            from darksfm.matching import FeatureMap

            p = tmp_path / f"f{trial}.drkftr"
            formats.write_features(p, FeatureMap.from_array(ftr_payload, confidence=conf))
            back = formats.read_features(p)
            assert np.array_equal(back.data.astype(np.float32), ftr_payload)
            if conf is None:
                assert back.confidence is None
            else:
                assert np.array_equal(back.confidence.astype(np.float32), conf)

            from darksfm.geometry import PointMap

            pts = rng.standard_normal((h, w, 3)).astype(np.float32)
            pconf = rng.random((h, w)).astype(np.float32)
            p = tmp_path / f"p{trial}.drkpts"
            formats.write_pointmap(
                p, PointMap(width=w, height=h, points=pts, confidence=pconf)
            )
            back = formats.read_pointmap(p)
            assert np.array_equal(back.points.astype(np.float32), pts)
            assert np.array_equal(back.confidence.astype(np.float32), pconf)
