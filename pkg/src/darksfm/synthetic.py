"""Deterministic synthetic fixtures: a ring of cameras around a point cloud.

The fixture is exactly self-consistent on the pixel grid: every scene
point is planted at its rounded projection in each view, the per-view
pointmap stores that point's exact camera-frame coordinates at the
planted pixel (zero confidence elsewhere), and the feature map stores the
point's unique unit descriptor there. Landmarks float inside the camera
ring and are visible from every view, which gives the bundle problem the
strong all-around geometry a desk-scale accuracy study needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import (
    write_correspondences,
    write_features,
    write_image,
    write_intrinsics,
    write_pointmap,
    write_trajectory,
)
from .geometry import Intrinsics, PointMap, Pose, project_points
from .matching import Correspondence, FeatureMap
from .raw_pipeline import LinearImage


@dataclass
class RingScene:
    width: int
    height: int
    intrinsics: Intrinsics
    poses: list[Pose]
    points: np.ndarray
    projections: np.ndarray  # (n_cameras, n_points, 2) sub-pixel
    visible: np.ndarray  # (n_cameras, n_points) bool
    descriptor_dim: int
    descriptors: np.ndarray  # (n_points, dim) unit vectors

    @property
    def n_cameras(self) -> int:
        return len(self.poses)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def view_names(self) -> list[str]:
        return [f"view{i:03d}" for i in range(self.n_cameras)]

    def diameter(self) -> float:
        everything = np.vstack([self.points, [p.translation for p in self.poses]])
        return float(np.linalg.norm(everything.max(axis=0) - everything.min(axis=0)))


def _look_at(center: np.ndarray, target: np.ndarray) -> Pose:
    """World-from-camera pose with +z toward the target, y pointing down-ish."""
    forward = target - center
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.column_stack([right, down, forward])
    return Pose.from_rt(R, center)


def make_ring_scene(
    n_cameras: int = 10,
    n_points: int = 500,
    radius: float = 5.0,
    point_spread: float = 1.0,
    width: int = 192,
    height: int = 144,
    focal: float = 200.0,
    seed: int = 0,
) -> RingScene:
    """Cameras on a circle looking at the origin, points in a central box.

    Points are kept only when visible in every view, and no two points
    share a rounded pixel in any view, which keeps nearest-pixel pointmap
    lookups exact.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    k = Intrinsics(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0)
    poses = []
    for i in range(n_cameras):
        theta = 2.0 * np.pi * i / n_cameras
        center = np.array(
            [radius * np.cos(theta), radius * np.sin(theta), 0.3 * np.sin(2.0 * theta)]
        )
        poses.append(_look_at(center, np.zeros(3)))

    margin = 3.0

    def evaluate(candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        proj = np.empty((n_cameras, candidates.shape[0], 2))
        vis = np.empty((n_cameras, candidates.shape[0]), dtype=bool)
        for c, pose in enumerate(poses):
            pix, depth = project_points(k, pose, candidates)
            proj[c] = pix
            vis[c] = (
                (depth > 0.5)
                & (pix[:, 0] >= margin)
                & (pix[:, 0] <= width - 1 - margin)
                & (pix[:, 1] >= margin)
                & (pix[:, 1] <= height - 1 - margin)
            )
        return proj, vis

    taken: list[set[tuple[int, int]]] = [set() for _ in range(n_cameras)]
    points_list: list[np.ndarray] = []
    proj_list: list[np.ndarray] = []
    vis_list: list[np.ndarray] = []
    for _ in range(64):  # replenish candidates until the quota is met
        if len(points_list) == n_points:
            break
        candidates = rng.uniform(-point_spread, point_spread, size=(4 * n_points, 3))
        proj, vis = evaluate(candidates)
        for idx in range(candidates.shape[0]):
            if len(points_list) == n_points:
                break
            if not vis[:, idx].all():
                continue
            keys = {}
            ok = True
            for c in range(n_cameras):
                key = (int(np.rint(proj[c, idx, 0])), int(np.rint(proj[c, idx, 1])))
                if key in taken[c]:
                    ok = False
                    break
                keys[c] = key
            if ok:
                points_list.append(candidates[idx])
                proj_list.append(proj[:, idx])
                vis_list.append(vis[:, idx])
                for c, key in keys.items():
                    taken[c].add(key)
    if len(points_list) < n_points:
        raise RuntimeError(
            f"only {len(points_list)} collision-free points found; loosen the layout"
        )
    dim = 16
    desc = rng.standard_normal((n_points, dim))
    desc /= np.linalg.norm(desc, axis=1, keepdims=True)
    return RingScene(
        width=width,
        height=height,
        intrinsics=k,
        poses=poses,
        points=np.array(points_list),
        projections=np.stack(proj_list, axis=1),
        visible=np.stack(vis_list, axis=1),
        descriptor_dim=dim,
        descriptors=desc,
    )


def _planted_pixels(scene: RingScene, cam: int) -> np.ndarray:
    return np.rint(scene.projections[cam]).astype(int)


def pointmap_for_view(scene: RingScene, cam: int) -> PointMap:
    """Sparse exact pointmap: local landmark coordinates at planted pixels.

    Pixels away from the landmarks carry zero confidence, mirroring a
    model that is only confident where it recognized structure.
    """
    pose = scene.poses[cam]
    points = np.zeros((scene.height, scene.width, 3))
    confidence = np.zeros((scene.height, scene.width))
    R_cw = pose.rotation_matrix().T
    local = (scene.points - pose.translation) @ R_cw.T
    planted = _planted_pixels(scene, cam)
    for p in np.flatnonzero(scene.visible[cam]):
        x, y = planted[p]
        points[y, x] = local[p]
        confidence[y, x] = 1.0
    return PointMap(
        width=scene.width, height=scene.height, points=points, confidence=confidence
    )


def feature_map_for_view(scene: RingScene, cam: int) -> FeatureMap:
    """Sparse feature map: each visible point's descriptor at its planted pixel."""
    data = np.zeros((scene.height, scene.width, scene.descriptor_dim))
    confidence = np.zeros((scene.height, scene.width))
    planted = _planted_pixels(scene, cam)
    for p in np.flatnonzero(scene.visible[cam]):
        x, y = planted[p]
        data[y, x] = scene.descriptors[p]
        confidence[y, x] = 1.0
    return FeatureMap.from_array(data, confidence=confidence, normalized=True)


def render_view(scene: RingScene, cam: int, seed: int = 0) -> LinearImage:
    """Cheap photometric stand-in: smooth gradient plus per-point splats."""
    rng = np.random.Generator(np.random.Philox(key=(seed << 8) + cam))
    xs = np.linspace(0.1, 0.6, scene.width)
    ys = np.linspace(0.1, 0.5, scene.height)
    base = np.stack(
        [
            np.tile(xs, (scene.height, 1)),
            np.tile(ys[:, None], (1, scene.width)),
            np.full((scene.height, scene.width), 0.25),
        ]
    )
    planted = _planted_pixels(scene, cam)
    brightness = 0.4 + 0.6 * rng.random(scene.n_points)
    for p in np.flatnonzero(scene.visible[cam]):
        x, y = planted[p]
        base[:, y, x] = brightness[p]
    return LinearImage.from_array(base)


def jittered_projections(scene: RingScene, sigma: float, seed: int = 0) -> np.ndarray:
    """One noisy detection per (view, point), shared by every pair.

    This mirrors per-image keypoint localization error: the same jittered
    pixel for a point reappears in every correspondence involving that
    view.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    return scene.projections + rng.normal(0.0, sigma, scene.projections.shape)


def edge_matches(
    scene: RingScene,
    i: int,
    j: int,
    projections: np.ndarray | None = None,
    limit: int | None = None,
) -> list[Correspondence]:
    """Sub-pixel correspondences for points visible in both views.

    ``projections`` overrides the exact projections, e.g. with
    ``jittered_projections`` output.
    """
    if projections is None:
        projections = scene.projections
    shared = np.flatnonzero(scene.visible[i] & scene.visible[j])
    if limit is not None:
        shared = shared[:limit]
    p1 = projections[i, shared]
    p2 = projections[j, shared]
    return [
        Correspondence(p1=(p1[m, 0], p1[m, 1]), p2=(p2[m, 0], p2[m, 1]), score=1.0)
        for m in range(shared.size)
    ]


def all_edges(scene: RingScene) -> list[tuple[int, int]]:
    return [
        (i, j)
        for i in range(scene.n_cameras)
        for j in range(i + 1, scene.n_cameras)
        if (scene.visible[i] & scene.visible[j]).sum() >= 3
    ]


def write_fixture(
    out_dir: str | Path,
    scene: RingScene,
    seed: int = 0,
    with_matches: bool = True,
) -> None:
    """Materialize the fixture as the interchange files the CLI consumes."""
    out = Path(out_dir)
    names = scene.view_names()
    for sub in ("images", "features", "pointmaps", "matches"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for c, name in enumerate(names):
        write_image(out / "images" / f"{name}.drkimg", render_view(scene, c, seed))
        write_features(out / "features" / f"{name}.drkftr", feature_map_for_view(scene, c))
        write_pointmap(out / "pointmaps" / f"{name}.drkpts", pointmap_for_view(scene, c))
    if with_matches:
        for i, j in all_edges(scene):
            write_correspondences(
                out / "matches" / f"{names[i]}__{names[j]}.corr",
                edge_matches(scene, i, j),
            )
    write_intrinsics(out / "intrinsics.txt", {"*": scene.intrinsics})
    write_trajectory(out / "gt_poses.txt", names, scene.poses)


def exact_reconstruction(scene: RingScene) -> "Reconstruction":
    """Ground-truth reconstruction with exact sub-pixel observations.

    Useful as a bundle-adjustment starting point before perturbation.
    """
    from .global_recon import Reconstruction

    obs_cam, obs_point, obs_xy = [], [], []
    for c in range(scene.n_cameras):
        for p in np.flatnonzero(scene.visible[c]):
            obs_cam.append(c)
            obs_point.append(int(p))
            obs_xy.append(scene.projections[c, p])
    return Reconstruction(
        poses=[p.copy() for p in scene.poses],
        intrinsics=[scene.intrinsics] * scene.n_cameras,
        scales=np.ones(scene.n_cameras),
        points=scene.points.copy(),
        obs_cam=np.array(obs_cam),
        obs_point=np.array(obs_point),
        obs_xy=np.array(obs_xy),
    )


def natural_test_image(
    width: int = 512,
    height: int = 352,
    peak_dn: float = 12000.0,
    seed: int = 0,
) -> LinearImage:
    """Smooth DN-domain test image: a mixture of Gaussian blobs per channel."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    xs, ys = np.meshgrid(np.linspace(0, 1, width), np.linspace(0, 1, height))
    img = np.zeros((3, height, width))
    for c in range(3):
        img[c] = 0.08 + 0.04 * xs + 0.03 * ys
        for _ in range(6):
            cx, cy = rng.random(2)
            sigma = 0.08 + 0.2 * rng.random()
            amp = 0.2 + 0.8 * rng.random()
            img[c] += amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
        img[c] /= img[c].max()
    return LinearImage.from_array(img * peak_dn)
