"""Global reconstruction: coarse Sim(3) alignment, then bundle adjustment.

Coarse alignment walks a maximum-similarity spanning tree, registering
each image's local pointmap into the world frame with a confidence-
weighted closed-form similarity fit, then polishes all nodes against every
usable edge. Bundle adjustment is a Levenberg-Marquardt minimizer of
robust 2D reprojection error with a quadratic prior pulling intrinsics
toward their calibrated values; the point blocks are eliminated with a
Schur complement, and the gauge is fixed by freezing the first pose plus
one translation coordinate of the second camera (total scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeometryError,
    DisconnectedGraphError,
    InsufficientDataError,
    NumericalError,
)
from .geometry import Intrinsics, PointMap, Pose
from .matching import Correspondence, corr_arrays
from .rotations import axis_angle_to_quat, normalize_quat, quat_multiply
from .scene_graph import Edge, SceneGraph, maximum_similarity_spanning_tree
from .sim3 import Sim3, estimate_sim3_weighted

N_CAM_PARAMS = 10  # 3 rotation increment, 3 center, 4 intrinsics
N_PT_PARAMS = 3


@dataclass
class Reconstruction:
    """Globally aligned cameras, per-image pointmap scales, and sparse structure.

    Observations are stored flat: observation m is point ``obs_point[m]``
    seen in camera ``obs_cam[m]`` at pixel ``obs_xy[m]``.
    """

    poses: list[Pose]
    intrinsics: list[Intrinsics] | None
    scales: np.ndarray
    points: np.ndarray
    obs_cam: np.ndarray
    obs_point: np.ndarray
    obs_xy: np.ndarray

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=np.float64)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.obs_cam = np.asarray(self.obs_cam, dtype=np.intp)
        self.obs_point = np.asarray(self.obs_point, dtype=np.intp)
        self.obs_xy = np.asarray(self.obs_xy, dtype=np.float64).reshape(-1, 2)
        if (self.scales <= 0).any():
            raise ValueError("pointmap scales must be positive")
        if self.points.shape[0]:
            counts = np.bincount(self.obs_point, minlength=self.points.shape[0])
            if (counts < 2).any():
                raise ValueError("every point needs at least 2 observations")

    @property
    def n_cameras(self) -> int:
        return len(self.poses)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_observations(self) -> int:
        return self.obs_xy.shape[0]

    def copy(self) -> "Reconstruction":
        return Reconstruction(
            poses=[p.copy() for p in self.poses],
            intrinsics=list(self.intrinsics) if self.intrinsics is not None else None,
            scales=self.scales.copy(),
            points=self.points.copy(),
            obs_cam=self.obs_cam.copy(),
            obs_point=self.obs_point.copy(),
            obs_xy=self.obs_xy.copy(),
        )


# -- coarse alignment ---------------------------------------------------------


@dataclass
class _EdgeData:
    """Per-edge match data; `xi`/`xj` rows are meaningful only where the
    corresponding side confidence is positive."""

    xi: np.ndarray  # (M, 3) local points, lower-index side
    xj: np.ndarray  # (M, 3) local points, higher-index side
    ci: np.ndarray  # (M,) lower-side confidences
    cj: np.ndarray  # (M,) higher-side confidences
    pix_i: np.ndarray  # (M, 2) sub-pixel coordinates in image i
    pix_j: np.ndarray  # (M, 2)

    def pair_mask(self) -> np.ndarray:
        """Matches usable as 3D-3D constraints (both lookups confident)."""
        return (self.ci > 0) & (self.cj > 0)

    @property
    def w(self) -> np.ndarray:
        return self.ci * self.cj


def _extract_edge_data(
    pmaps: tuple[PointMap, PointMap],
    corr: list[Correspondence],
    min_edge_matches: int,
) -> _EdgeData | None:
    p1, p2, _ = corr_arrays(corr)
    if p1.shape[0] == 0:
        return None
    xi, ci = pmaps[0].lookup(p1)
    xj, cj = pmaps[1].lookup(p2)
    data = _EdgeData(xi=xi, xj=xj, ci=ci, cj=cj, pix_i=p1, pix_j=p2)
    if int(data.pair_mask().sum()) < min_edge_matches:
        return None
    return data


def _register_over_tree(
    n: int, tree: list[Edge], data: dict[Edge, _EdgeData]
) -> list[Sim3]:
    """Breadth-first registration from node 0; node 0 defines the world frame."""
    children: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in tree:
        children[i].append(j)
        children[j].append(i)
    sims: list[Sim3 | None] = [None] * n
    sims[0] = Sim3()
    queue = [0]
    while queue:
        parent = queue.pop(0)
        for child in sorted(children[parent]):
            if sims[child] is not None:
                continue
            e = (parent, child) if parent < child else (child, parent)
            d = data[e]
            keep = d.pair_mask()
            x_parent, x_child = (d.xi, d.xj) if e[0] == parent else (d.xj, d.xi)
            world = sims[parent].apply(x_parent[keep])
            sims[child] = estimate_sim3_weighted(x_child[keep], world, d.w[keep])
            queue.append(child)
    return [s if s is not None else Sim3() for s in sims]


def _edge_residual(sims: list[Sim3], e: Edge, d: _EdgeData) -> float:
    keep = d.pair_mask()
    w = d.w[keep]
    diff = sims[e[0]].apply(d.xi[keep]) - sims[e[1]].apply(d.xj[keep])
    return float(np.sqrt(np.sum(w * np.sum(diff * diff, axis=1)) / w.sum()))


def coarse_align(
    graph: SceneGraph,
    pointmaps: dict[Edge, tuple[PointMap, PointMap]],
    matches: dict[Edge, list[Correspondence]],
    intrinsics: list[Intrinsics] | None = None,
    refine_rounds: int = 3,
    min_edge_matches: int = 3,
) -> Reconstruction:
    """Register per-edge local pointmaps into one world frame.

    The root node is fixed to the identity. Each remaining image enters the
    world frame through a confidence-weighted similarity fit along a
    maximum-similarity spanning tree; edges whose post-registration
    residual is grossly out of family are dropped (and the tree rebuilt),
    then a few rounds of alternating re-registration spread the non-tree
    constraints. Matched local points are fused into a sparse track set
    with per-view pixel observations.

    Raises DisconnectedGraphError when dropping unusable edges separates
    the graph; the error lists the surviving components.
    """
    n = graph.n_nodes
    if n < 2:
        raise InsufficientDataError("need at least 2 images")
    data: dict[Edge, _EdgeData] = {}
    for e in sorted(graph.edges):
        if e not in pointmaps or e not in matches:
            continue
        d = _extract_edge_data(pointmaps[e], matches[e], min_edge_matches)
        if d is not None:
            data[e] = d

    def _connectivity_check(edges: dict[Edge, _EdgeData]) -> None:
        g = SceneGraph(names=list(graph.names), edges={e: 0.0 for e in edges})
        if not g.is_connected():
            raise DisconnectedGraphError(
                "graph disconnected after dropping unusable edges",
                components=g.components(),
            )

    _connectivity_check(data)
    scores = {e: graph.edges[e] for e in data}
    sims: list[Sim3] = []
    for _ in range(3):  # registration / outlier-rejection passes
        tree = maximum_similarity_spanning_tree(n, scores)
        sims = _register_over_tree(n, tree, data)
        residuals = {e: _edge_residual(sims, e, d) for e, d in data.items()}
        world = np.concatenate(
            [sims[e[0]].apply(d.xi[d.pair_mask()]) for e, d in data.items()]
        )
        diameter = float(np.linalg.norm(world.max(axis=0) - world.min(axis=0)))
        cutoff = max(10.0 * float(np.median(list(residuals.values()))), 1e-9 * diameter)
        bad = [e for e, r in residuals.items() if r > cutoff]
        if not bad:
            break
        for e in bad:
            del data[e]
            del scores[e]
        _connectivity_check(data)

    for _ in range(refine_rounds):
        for node in range(1, n):
            src_parts, dst_parts, w_parts = [], [], []
            for e, d in data.items():
                keep = d.pair_mask()
                if node == e[0]:
                    src_parts.append(d.xi[keep])
                    dst_parts.append(sims[e[1]].apply(d.xj[keep]))
                    w_parts.append(d.w[keep])
                elif node == e[1]:
                    src_parts.append(d.xj[keep])
                    dst_parts.append(sims[e[0]].apply(d.xi[keep]))
                    w_parts.append(d.w[keep])
            if not src_parts:
                continue
            try:
                sims[node] = estimate_sim3_weighted(
                    np.concatenate(src_parts),
                    np.concatenate(dst_parts),
                    np.concatenate(w_parts),
                )
            except DegenerateGeometryError:
                continue

    # fuse matches of the surviving edges into tracks keyed by
    # (image, rounded pixel); every match contributes 2D observations,
    # while 3D positions come only from confident pointmap lookups
    parent: dict[tuple[int, int, int], tuple[int, int, int]] = {}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    obs_pixels: dict[tuple[int, int, int], np.ndarray] = {}
    contributions: list[tuple[tuple[int, int, int], np.ndarray, float]] = []
    for e in sorted(data):
        d = data[e]
        wi = sims[e[0]].apply(d.xi)
        wj = sims[e[1]].apply(d.xj)
        for m in range(d.pix_i.shape[0]):
            ki = (e[0], int(np.rint(d.pix_i[m, 0])), int(np.rint(d.pix_i[m, 1])))
            kj = (e[1], int(np.rint(d.pix_j[m, 0])), int(np.rint(d.pix_j[m, 1])))
            for k, pix in ((ki, d.pix_i[m]), (kj, d.pix_j[m])):
                parent.setdefault(k, k)
                obs_pixels.setdefault(k, pix)
            union(ki, kj)
            if d.ci[m] > 0:
                contributions.append((ki, wi[m], float(d.ci[m])))
            if d.cj[m] > 0:
                contributions.append((kj, wj[m], float(d.cj[m])))

    root_of = {k: find(k) for k in parent}
    track_ids: dict[tuple[int, int, int], int] = {}
    for k in sorted(set(root_of.values())):
        track_ids[k] = len(track_ids)
    sums = np.zeros((len(track_ids), 3))
    wsums = np.zeros(len(track_ids))
    for k, pt, w in contributions:
        t = track_ids[root_of[k]]
        sums[t] += w * pt
        wsums[t] += w
    with np.errstate(invalid="ignore"):
        points = sums / wsums[:, None]

    obs_cam, obs_point, obs_xy = [], [], []
    for k in sorted(parent):
        obs_cam.append(k[0])
        obs_point.append(track_ids[root_of[k]])
        obs_xy.append(obs_pixels[k])

    # keep tracks observed in >= 2 images that own at least one confident
    # 3D contribution (there is nothing to initialize the rest from)
    obs_cam_arr = np.array(obs_cam, dtype=np.intp)
    obs_point_arr = np.array(obs_point, dtype=np.intp)
    obs_xy_arr = np.array(obs_xy, dtype=np.float64).reshape(-1, 2)
    pairs = np.unique(np.stack([obs_point_arr, obs_cam_arr]), axis=1)
    n_views = np.bincount(pairs[0], minlength=len(track_ids))
    keep_tracks = (n_views >= 2) & (wsums > 0)
    remap = -np.ones(len(track_ids), dtype=np.intp)
    remap[keep_tracks] = np.arange(int(keep_tracks.sum()))
    keep_obs = keep_tracks[obs_point_arr]

    return Reconstruction(
        poses=[Pose(rotation=s.rotation.copy(), translation=s.translation.copy()) for s in sims],
        intrinsics=list(intrinsics) if intrinsics is not None else None,
        scales=np.array([s.scale for s in sims]),
        points=points[keep_tracks],
        obs_cam=obs_cam_arr[keep_obs],
        obs_point=remap[obs_point_arr[keep_obs]],
        obs_xy=obs_xy_arr[keep_obs],
    )


# -- bundle adjustment --------------------------------------------------------


@dataclass
class SolverOptions:
    max_iters: int = 50
    ftol: float = 1e-14
    rmse_atol: float = 1e-9  # stop once pixel RMSE falls below this
    huber_delta: float = 2.0
    lambda_init: float = 1e-6
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    lambda_max: float = 1e10
    solver: str = "schur"  # "schur" or "dense"
    verbose: bool = False


@dataclass
class BundleAdjustResult:
    reconstruction: Reconstruction
    initial_rmse: float
    final_rmse: float
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""


def reprojection_residuals_and_jacobians(
    poses: list[Pose],
    intrinsics: list[Intrinsics],
    points: np.ndarray,
    obs_cam: np.ndarray,
    obs_point: np.ndarray,
    obs_xy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reprojection residuals and analytic Jacobians for every observation.

    The camera block is ordered [rotation increment (3), center (3),
    fx, fy, cx, cy]; rotation increments are local axis-angle updates
    composed on the right of the world-from-camera rotation (see
    ``apply_camera_update``). Returns (r (M, 2), J_cam (M, 2, 10),
    J_pt (M, 2, 3)).
    """
    m = obs_xy.shape[0]
    r = np.empty((m, 2))
    j_cam = np.zeros((m, 2, N_CAM_PARAMS))
    j_pt = np.empty((m, 2, N_PT_PARAMS))
    R_all = np.stack([p.rotation_matrix() for p in poses])
    C_all = np.stack([p.translation for p in poses])
    K_all = np.array([(k.fx, k.fy, k.cx, k.cy) for k in intrinsics])
    Rc = R_all[obs_cam]
    Cc = C_all[obs_cam]
    Kc = K_all[obs_cam]
    y = np.einsum("nji,nj->ni", Rc, points[obs_point] - Cc)  # camera-frame point
    x, yy, z = y[:, 0], y[:, 1], y[:, 2]
    fx, fy, cx, cy = Kc[:, 0], Kc[:, 1], Kc[:, 2], Kc[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * x / z + cx
        v = fy * yy / z + cy
        r[:, 0] = u - obs_xy[:, 0]
        r[:, 1] = v - obs_xy[:, 1]
        # d residual / d camera-frame point
        dr_dy = np.zeros((m, 2, 3))
        dr_dy[:, 0, 0] = fx / z
        dr_dy[:, 0, 2] = -fx * x / (z * z)
        dr_dy[:, 1, 1] = fy / z
        dr_dy[:, 1, 2] = -fy * yy / (z * z)
        du_dx = x / z
        dv_dy = yy / z
    # rotation increment: dy/d(theta) = skew(y)
    sk = np.zeros((m, 3, 3))
    sk[:, 0, 1] = -y[:, 2]
    sk[:, 0, 2] = y[:, 1]
    sk[:, 1, 0] = y[:, 2]
    sk[:, 1, 2] = -y[:, 0]
    sk[:, 2, 0] = -y[:, 1]
    sk[:, 2, 1] = y[:, 0]
    j_cam[:, :, 0:3] = np.einsum("nij,njk->nik", dr_dy, sk)
    RcT = np.transpose(Rc, (0, 2, 1))
    j_cam[:, :, 3:6] = -np.einsum("nij,njk->nik", dr_dy, RcT)
    j_cam[:, 0, 6] = du_dx
    j_cam[:, 1, 7] = dv_dy
    j_cam[:, 0, 8] = 1.0
    j_cam[:, 1, 9] = 1.0
    j_pt[:] = np.einsum("nij,njk->nik", dr_dy, RcT)
    return r, j_cam, j_pt


def apply_camera_update(
    pose: Pose, k: Intrinsics, delta: np.ndarray
) -> tuple[Pose, Intrinsics]:
    """Apply a 10-vector camera update in the solver's parameterization."""
    dq = axis_angle_to_quat(delta[0:3])
    q = normalize_quat(quat_multiply(pose.rotation, dq))
    new_pose = Pose(rotation=q, translation=pose.translation + delta[3:6])
    new_k = Intrinsics(
        fx=k.fx + delta[6], fy=k.fy + delta[7], cx=k.cx + delta[8], cy=k.cy + delta[9]
    )
    return new_pose, new_k


def _intrinsics_prior(
    intrinsics: list[Intrinsics], calibrated: list[Intrinsics], lambda_intr: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-camera prior residuals (C, 4) and their diagonal Jacobians (C, 4).

    Residuals are deviations relative to the calibrated focal lengths,
    scaled by sqrt(lambda_intr); principal-point deviations are normalized
    by the matching focal so all four terms are dimensionless.
    """
    sq = math.sqrt(lambda_intr)
    C = len(intrinsics)
    r = np.zeros((C, 4))
    jdiag = np.zeros((C, 4))
    for c, (k, k0) in enumerate(zip(intrinsics, calibrated)):
        norm = np.array([k0.fx, k0.fy, k0.fx, k0.fy])
        vals = np.array([k.fx - k0.fx, k.fy - k0.fy, k.cx - k0.cx, k.cy - k0.cy])
        r[c] = sq * vals / norm
        jdiag[c] = sq / norm
    return r, jdiag


def _robust_weights(r: np.ndarray, delta: float) -> tuple[np.ndarray, float]:
    """Huber IRLS weights per observation and the exact robust objective."""
    s = np.linalg.norm(r, axis=1)
    w = np.where(s <= delta, 1.0, delta / np.where(s > 0, s, 1.0))
    rho = np.where(s <= delta, s * s, delta * (2.0 * s - delta))
    return w, float(rho.sum())


class _BundleProblem:
    """Static structure shared by every LM iteration."""

    def __init__(self, recon: Reconstruction, calibrated: list[Intrinsics], opts: SolverOptions):
        self.obs_cam = recon.obs_cam
        self.obs_point = recon.obs_point
        self.obs_xy = recon.obs_xy
        self.n_cam = recon.n_cameras
        self.n_pt = recon.n_points
        self.calibrated = calibrated
        self.opts = opts
        # all (o1, o2) observation pairs sharing a point, for the Schur fill-in
        order = np.argsort(self.obs_point, kind="stable")
        o1_parts, o2_parts = [], []
        start = 0
        sorted_pts = self.obs_point[order]
        for t in range(1, len(order) + 1):
            if t == len(order) or sorted_pts[t] != sorted_pts[start]:
                g = order[start:t]
                o1_parts.append(np.repeat(g, g.size))
                o2_parts.append(np.tile(g, g.size))
                start = t
        self.pair_o1 = np.concatenate(o1_parts) if o1_parts else np.zeros(0, dtype=np.intp)
        self.pair_o2 = np.concatenate(o2_parts) if o2_parts else np.zeros(0, dtype=np.intp)
        self.frozen = self._frozen_params(recon)
        # scatter indices are fixed by the visibility structure; build once
        self.idx_U = _flat_index(self.obs_cam, N_CAM_PARAMS * N_CAM_PARAMS)
        self.idx_bc = _flat_index(self.obs_cam, N_CAM_PARAMS)
        self.idx_V = _flat_index(self.obs_point, N_PT_PARAMS * N_PT_PARAMS)
        self.idx_bp = _flat_index(self.obs_point, N_PT_PARAMS)
        pair_groups = self.obs_cam[self.pair_o1] * self.n_cam + self.obs_cam[self.pair_o2]
        self.idx_S = _flat_index(pair_groups, N_CAM_PARAMS * N_CAM_PARAMS)

    def _frozen_params(self, recon: Reconstruction) -> np.ndarray:
        """Gauge: first pose entirely; one center coordinate of camera 2 for scale."""
        frozen = np.zeros(self.n_cam * N_CAM_PARAMS, dtype=bool)
        frozen[0:6] = True
        if self.n_cam > 1:
            rel = recon.poses[1].translation - recon.poses[0].translation
            if np.linalg.norm(rel) > 0:
                j = int(np.argmax(np.abs(rel)))
                frozen[N_CAM_PARAMS + 3 + j] = True
        return frozen

    def objective(
        self, poses: list[Pose], intrinsics: list[Intrinsics], points: np.ndarray, lambda_intr: float
    ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        r, j_cam, j_pt = reprojection_residuals_and_jacobians(
            poses, intrinsics, points, self.obs_cam, self.obs_point, self.obs_xy
        )
        w, robust = _robust_weights(r, self.opts.huber_delta)
        r_pr, _ = _intrinsics_prior(intrinsics, self.calibrated, lambda_intr)
        total = robust + float(np.sum(r_pr * r_pr))
        return total, r, j_cam, j_pt, w

    def check_finite(self, r: np.ndarray) -> None:
        bad = ~np.isfinite(r).all(axis=1)
        if bad.any():
            o = int(np.flatnonzero(bad)[0])
            raise NumericalError(
                f"non-finite residual at observation {o} "
                f"(camera {int(self.obs_cam[o])}, point {int(self.obs_point[o])})"
            )


def _flat_index(index: np.ndarray, block: int) -> np.ndarray:
    return (index[:, None] * block + np.arange(block)[None, :]).ravel()


def _scatter_sum(values: np.ndarray, flat_idx: np.ndarray, n_groups: int) -> np.ndarray:
    """Sum (M, ...) blocks into (n_groups, ...) via precomputed flat indices;
    bincount is much faster than np.add.at for this access pattern."""
    block = int(np.prod(values.shape[1:])) if values.ndim > 1 else 1
    out = np.bincount(flat_idx, weights=values.reshape(-1), minlength=n_groups * block)
    return out.reshape((n_groups,) + values.shape[1:])


def _solve_schur(
    prob: _BundleProblem,
    r: np.ndarray,
    j_cam: np.ndarray,
    j_pt: np.ndarray,
    w: np.ndarray,
    prior_r: np.ndarray,
    prior_j: np.ndarray,
    damping: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One damped normal-equations solve; returns (cam deltas, point deltas)."""
    sw = np.sqrt(w)[:, None, None]
    jc = j_cam * sw
    jp = j_pt * sw
    rw = r * np.sqrt(w)[:, None]
    C, P = prob.n_cam, prob.n_pt
    jcT = jc.transpose(0, 2, 1)
    jpT = jp.transpose(0, 2, 1)
    U = _scatter_sum(jcT @ jc, prob.idx_U, C)
    V = _scatter_sum(jpT @ jp, prob.idx_V, P)
    Wo = jcT @ jp  # (M, 10, 3)
    b_cam = _scatter_sum(-(jcT @ rw[:, :, None])[:, :, 0], prob.idx_bc, C)
    b_pt = _scatter_sum(-(jpT @ rw[:, :, None])[:, :, 0], prob.idx_bp, P)
    # intrinsics prior occupies the last 4 slots of each camera block
    intr = np.arange(6, 10)
    U[:, intr, intr] += prior_j * prior_j
    b_cam[:, 6:10] -= prior_j * prior_r
    # Marquardt damping on the block diagonals
    cam_diag = np.arange(N_CAM_PARAMS)
    U[:, cam_diag, cam_diag] += damping * (U[:, cam_diag, cam_diag] + 1e-12)
    pt_diag = np.arange(N_PT_PARAMS)
    Vd = V.copy()
    Vd[:, pt_diag, pt_diag] += damping * (V[:, pt_diag, pt_diag] + 1e-12)
    V_inv = np.linalg.inv(Vd)
    Y = Wo @ V_inv[prob.obs_point]  # (M, 10, 3)
    S = np.zeros((C, C, N_CAM_PARAMS, N_CAM_PARAMS))
    idx = np.arange(C)
    S[idx, idx] = U
    if prob.pair_o1.size:
        blocks = -(Y[prob.pair_o1] @ Wo[prob.pair_o2].transpose(0, 2, 1))
        S += _scatter_sum(blocks, prob.idx_S, C * C).reshape(
            C, C, N_CAM_PARAMS, N_CAM_PARAMS
        )
    S = S.transpose(0, 2, 1, 3).reshape(C * N_CAM_PARAMS, C * N_CAM_PARAMS)
    rhs = b_cam - _scatter_sum(
        (Y @ b_pt[prob.obs_point][:, :, None])[:, :, 0], prob.idx_bc, C
    )
    rhs = rhs.reshape(-1)
    frozen = prob.frozen
    S[frozen, :] = 0.0
    S[:, frozen] = 0.0
    S[frozen, frozen] = 1.0
    rhs[frozen] = 0.0
    delta_cam = np.linalg.solve(S, rhs).reshape(C, N_CAM_PARAMS)
    # back-substitute points
    corr = _scatter_sum(
        (Wo.transpose(0, 2, 1) @ delta_cam[prob.obs_cam][:, :, None])[:, :, 0],
        prob.idx_bp,
        P,
    )
    delta_pt = (V_inv @ (b_pt - corr)[:, :, None])[:, :, 0]
    return delta_cam, delta_pt


def _solve_dense(
    prob: _BundleProblem,
    r: np.ndarray,
    j_cam: np.ndarray,
    j_pt: np.ndarray,
    w: np.ndarray,
    prior_r: np.ndarray,
    prior_j: np.ndarray,
    damping: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Reference dense solve of the same damped normal equations."""
    C, P, M = prob.n_cam, prob.n_pt, r.shape[0]
    n_params = C * N_CAM_PARAMS + P * N_PT_PARAMS
    J = np.zeros((2 * M + 4 * C, n_params))
    res = np.zeros(2 * M + 4 * C)
    sw = np.sqrt(w)
    for o in range(M):
        c, p = prob.obs_cam[o], prob.obs_point[o]
        J[2 * o : 2 * o + 2, c * N_CAM_PARAMS : (c + 1) * N_CAM_PARAMS] = sw[o] * j_cam[o]
        J[2 * o : 2 * o + 2, C * N_CAM_PARAMS + 3 * p : C * N_CAM_PARAMS + 3 * p + 3] = (
            sw[o] * j_pt[o]
        )
        res[2 * o : 2 * o + 2] = sw[o] * r[o]
    for c in range(C):
        for i in range(4):
            J[2 * M + 4 * c + i, c * N_CAM_PARAMS + 6 + i] = prior_j[c, i]
            res[2 * M + 4 * c + i] = prior_r[c, i]
    H = J.T @ J
    g = -J.T @ res
    H += np.diag(damping * (np.diag(H) + 1e-12))
    frozen = np.concatenate([prob.frozen, np.zeros(P * N_PT_PARAMS, dtype=bool)])
    H[frozen, :] = 0.0
    H[:, frozen] = 0.0
    H[frozen, frozen] = 1.0
    g[frozen] = 0.0
    delta = np.linalg.solve(H, g)
    return (
        delta[: C * N_CAM_PARAMS].reshape(C, N_CAM_PARAMS),
        delta[C * N_CAM_PARAMS :].reshape(P, N_PT_PARAMS),
    )


def bundle_adjust(
    recon: Reconstruction,
    calibrated: list[Intrinsics],
    lambda_intr: float = 10.0,
    opts: SolverOptions | None = None,
) -> BundleAdjustResult:
    """Levenberg-Marquardt refinement of poses, points, and intrinsics.

    Minimizes the Huber-robustified 2D reprojection error plus
    lambda_intr * sum of squared relative intrinsics deviations from
    ``calibrated``. Accepted steps strictly decrease the objective, so the
    accepted-objective sequence is non-increasing. Failure to find any
    decreasing step at maximum damping is reported as convergence at the
    current state, not an error.
    """
    opts = opts or SolverOptions()
    if opts.solver not in ("schur", "dense"):
        raise ValueError(f"unknown solver {opts.solver!r}")
    if recon.intrinsics is not None:
        intrinsics = list(recon.intrinsics)
    else:
        intrinsics = list(calibrated)
    if len(calibrated) != recon.n_cameras or len(intrinsics) != recon.n_cameras:
        raise ValueError("need calibrated intrinsics for every camera")
    poses = [p.copy() for p in recon.poses]
    points = recon.points.copy()
    prob = _BundleProblem(recon, calibrated, opts)
    solve = _solve_schur if opts.solver == "schur" else _solve_dense

    def pixel_rmse(r: np.ndarray) -> float:
        if r.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(np.sum(r * r, axis=1))))

    F, r, j_cam, j_pt, w = prob.objective(poses, intrinsics, points, lambda_intr)
    prob.check_finite(r)
    initial_rmse = pixel_rmse(r)
    history = [F]
    damping = opts.lambda_init
    converged = False
    message = "max iterations reached"
    iterations = 0
    for _ in range(opts.max_iters):
        prior_r, prior_j = _intrinsics_prior(intrinsics, calibrated, lambda_intr)
        accepted = False
        while True:
            try:
                d_cam, d_pt = solve(prob, r, j_cam, j_pt, w, prior_r, prior_j, damping)
            except np.linalg.LinAlgError:
                d_cam = d_pt = None
            if d_cam is not None and np.isfinite(d_cam).all() and np.isfinite(d_pt).all():
                try:
                    cand_poses = []
                    cand_intr = []
                    for c in range(prob.n_cam):
                        p_new, k_new = apply_camera_update(poses[c], intrinsics[c], d_cam[c])
                        cand_poses.append(p_new)
                        cand_intr.append(k_new)
                    cand_points = points + d_pt
                    F_new, r_new, jc_new, jp_new, w_new = prob.objective(
                        cand_poses, cand_intr, cand_points, lambda_intr
                    )
                except ValueError:
                    # e.g. an update pushing a focal length non-positive
                    F_new = np.inf
                if np.isfinite(F_new) and F_new < F:
                    poses, intrinsics, points = cand_poses, cand_intr, cand_points
                    drop = F - F_new
                    F, r, j_cam, j_pt, w = F_new, r_new, jc_new, jp_new, w_new
                    history.append(F)
                    damping = max(damping * opts.lambda_down, 1e-12)
                    accepted = True
                    iterations += 1
                    if drop <= opts.ftol * max(F, 1e-30):
                        converged = True
                        message = "converged: objective decrease below ftol"
                    elif pixel_rmse(r) < opts.rmse_atol:
                        converged = True
                        message = "converged: reprojection RMSE below absolute floor"
                    break
            damping *= opts.lambda_up
            if damping > opts.lambda_max:
                break
        if not accepted:
            converged = True
            message = (
                "converged at initialization: no decreasing step at maximum damping"
                if iterations == 0
                else "converged: no decreasing step at maximum damping"
            )
            break
        if converged:
            break
    if opts.max_iters == 0:
        message = "zero-iteration budget: output equals input"

    new_recon = Reconstruction(
        poses=poses,
        intrinsics=intrinsics,
        scales=recon.scales.copy(),
        points=points,
        obs_cam=recon.obs_cam.copy(),
        obs_point=recon.obs_point.copy(),
        obs_xy=recon.obs_xy.copy(),
    )
    return BundleAdjustResult(
        reconstruction=new_recon,
        initial_rmse=initial_rmse,
        final_rmse=pixel_rmse(r),
        objective_history=history,
        iterations=iterations,
        converged=converged,
        message=message,
    )
