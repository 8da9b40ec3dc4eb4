"""Batch command-line interface.

Subcommands: calibrate-noise, simulate, isp, sfm, eval-poses, eval-depth,
distill-loss. Every option resolves as flag > config file > environment
variable (DARKSFM_<NAME>) > built-in default, and all randomness derives
from the single --seed flag, so identical invocations on identical inputs
produce byte-identical outputs and reports. ``--threads`` bounds internal
parallelism; the numerical kernels are vectorized single-threaded code, so
results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, formats
from .errors import DarkSfmError, FileFormatError
from .evaluation import (
    DepthPair,
    Trajectory,
    align_channels_median,
    align_sim3,
    ate,
    depth_metrics,
    psnr,
    rpe,
)
from .geometry import (
    Intrinsics,
    PointMap,
    Pose,
    estimate_essential_ransac,
    recover_pose,
    triangulate,
)
from .global_recon import SolverOptions, bundle_adjust, coarse_align
from .matching import fallback_descriptors, reciprocal_match
from .noise_model import calibrate, synthesize, MeanVarSample, predicted_snr
from .raw_pipeline import FULL_SCALE, IspConfig, LinearImage, RawImage, apply_isp
from .raw_pipeline import demosaic_subsample, downsample_area, measure_snr
from .scene_graph import build_graph, pairwise_similarity

log = logging.getLogger("darksfm")

DEFAULT_SEED = 0

REQUIRED = object()  # schema sentinel: the option must resolve to a value

# option name -> (type, default)
_GLOBAL_SCHEMA: dict[str, tuple[type, Any]] = {
    "seed": (int, DEFAULT_SEED),
    "threads": (int, 0),  # 0 = all available cores
    "format": (str, "json"),
    "log_level": (str, "warning"),
}


def _parse_bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return bool(v)
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _coerce(value: Any, typ: type) -> Any:
    if value is None:
        return None
    if typ is bool:
        return _parse_bool(value)
    return typ(value)


def _resolve_options(
    args: argparse.Namespace, schema: dict[str, tuple[type, Any]]
) -> dict[str, Any]:
    """Apply the precedence chain: flag > config file > environment > default."""
    config: dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FileFormatError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(config, dict):
            raise FileFormatError(f"config {config_path} must hold a JSON object")
    out: dict[str, Any] = {}
    missing = []
    for key, (typ, default) in schema.items():
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, config.get(key.replace("_", "-")))
        if value is None:
            value = os.environ.get("DARKSFM_" + key.upper())
        if value is None:
            if default is REQUIRED:
                missing.append(key)
                continue
            value = default
        try:
            out[key] = _coerce(value, typ)
        except (TypeError, ValueError) as exc:
            raise DarkSfmError(f"bad value for option {key!r}: {exc}") from exc
    if missing:
        raise DarkSfmError(f"missing required option(s): {', '.join(missing)}")
    return out


def _emit_report(report: dict[str, Any], fmt: str) -> None:
    if fmt == "text":
        for key in sorted(report):
            print(f"{key} {report[key]}")
    else:
        print(json.dumps(report, sort_keys=True, indent=2))


def _json_safe(value: float) -> float | str:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _version_text() -> str:
    lines = [f"darksfm {__version__}", "formats:"]
    for name in sorted(formats.FORMAT_VERSIONS):
        lines.append(f"  {name} v{formats.FORMAT_VERSIONS[name]}")
    return "\n".join(lines)


# -- subcommand implementations ------------------------------------------------


def _cmd_calibrate_noise(opts: dict[str, Any]) -> dict[str, Any]:
    rows = formats.read_mean_var_csv(opts["samples"])
    samples = [MeanVarSample(channel=c, mean=m, variance=v) for c, m, v in rows]
    params = calibrate(samples)
    if opts["out"]:
        formats.write_noise_params(opts["out"], params)
    return {
        "channels": params.n_channels,
        "a": [float(v) for v in params.a],
        "b": [float(v) for v in params.b],
        "clamped": [bool(v) for v in params.clamped],
        "out": opts["out"],
    }


def _cmd_simulate(opts: dict[str, Any]) -> dict[str, Any]:
    clean_norm = formats.read_image(opts["clean"])
    params = formats.read_noise_params(opts["params"])
    dn_scale = opts["dn_scale"]
    clean_dn = LinearImage.from_array(clean_norm.data * dn_scale, no_clip=clean_norm.no_clip)
    if opts["snr_range"]:
        # draw the target uniformly in dB; noise sampling continues on the
        # same counter-based stream, so the whole run stays seed-determined
        try:
            lo, hi = (float(v) for v in opts["snr_range"].split(","))
        except ValueError as exc:
            raise DarkSfmError(f"--snr-range wants 'lo,hi' in dB: {exc}") from exc
        rng = np.random.Generator(np.random.Philox(key=(opts["seed"] << 1) + 1))
        target = float(rng.uniform(min(lo, hi), max(lo, hi)))
    elif opts["snr_db"] is not None:
        target = opts["snr_db"]
    else:
        raise DarkSfmError("one of --snr-db or --snr-range is required")
    noisy_dn, scale = synthesize(
        clean_dn,
        params,
        target_snr_db=target,
        seed=opts["seed"],
        mode=opts["mode"],
    )
    scaled_clean = LinearImage.from_array(scale * clean_dn.data)
    measured = measure_snr(noisy_dn, scaled_clean)
    formats.write_image(
        opts["out"], LinearImage.from_array(noisy_dn.data / dn_scale, no_clip=True)
    )
    return {
        "out": opts["out"],
        "target_snr_db": target,
        "brightness_scale": scale,
        "predicted_snr_db": predicted_snr(clean_dn, params, scale),
        "measured_snr_db": measured,
        "seed": opts["seed"],
    }


def _load_raw_input(opts: dict[str, Any]) -> RawImage:
    path = Path(opts["input"])
    if path.suffix == ".pgm":
        data = formats.read_pgm16(path)
        return RawImage(
            width=data.shape[1],
            height=data.shape[0],
            cfa_pattern=opts["cfa"],
            data=data,
            black_level=np.full(4, opts["black_level"]),
            white_level=opts["white_level"],
        )
    return formats.read_raw(path)


def _cmd_isp(opts: dict[str, Any]) -> dict[str, Any]:
    raw = _load_raw_input(opts)
    img = demosaic_subsample(raw)
    if opts["downsample"] > 1:
        img = downsample_area(img, opts["downsample"])
    layout = tuple(raw.cfa_pattern)
    bl_rgb = np.array(
        [
            raw.black_level[layout.index("R")],
            0.5
            * (
                raw.black_level[layout.index("G")]
                + raw.black_level[3 - layout[::-1].index("G")]
            ),
            raw.black_level[layout.index("B")],
        ]
    )
    try:
        gains = np.array([float(v) for v in opts["wb"].split(",")])
        if gains.size not in (1, 3):
            raise ValueError(f"need 1 or 3 gains, got {gains.size}")
    except ValueError as exc:
        raise DarkSfmError(f"bad --wb value {opts['wb']!r}: {exc}") from exc
    cfg = IspConfig(
        black_level=bl_rgb / FULL_SCALE,
        white_level=raw.white_level / FULL_SCALE,
        white_balance_gains=gains,
        gamma=opts["gamma"],
        clip=not opts["no_clip"],
    )
    out_img = apply_isp(img, cfg)
    out_path = Path(opts["output"])
    if out_path.suffix == ".png":
        formats.write_png(out_path, out_img)
    elif out_path.suffix == ".drkimg":
        formats.write_image(out_path, out_img)
    else:
        raise DarkSfmError(f"unsupported output extension {out_path.suffix!r}")
    return {
        "output": str(out_path),
        "width": out_img.width,
        "height": out_img.height,
        "clip": cfg.clip,
        "gamma": cfg.gamma,
    }


def _edge_pointmaps_from_geometry(
    name_pair: tuple[int, int],
    matches,
    k: list[Intrinsics],
    width: int,
    height: int,
    threshold: float,
    seed: int,
) -> tuple[PointMap, PointMap] | None:
    """Two-view bootstrap: RANSAC essential, recover pose, triangulate matches.

    Produces sparse per-edge pointmaps (camera-local 3D at matched pixels)
    so the coarse alignment can run without any external pointmap files.
    """
    i, j = name_pair
    edge_seed = seed * 1000003 + i * 1009 + j
    try:
        E, inliers = estimate_essential_ransac(
            matches, k[i], k[j], threshold=threshold, seed=edge_seed
        )
        inlier_matches = [m for m, good in zip(matches, inliers) if good]
        pose_j, _ = recover_pose(E, inlier_matches, k[i], k[j])
    except DarkSfmError as exc:
        log.warning("edge (%d, %d) bootstrap failed: %s", i, j, exc)
        return None
    pts_i = np.zeros((height, width, 3))
    conf_i = np.zeros((height, width))
    pts_j = np.zeros((height, width, 3))
    conf_j = np.zeros((height, width))
    identity = Pose()
    R_cw_j = pose_j.rotation_matrix().T
    for m in inlier_matches:
        try:
            X = triangulate(m.p1, m.p2, identity, pose_j, k[i], k[j])
        except DarkSfmError:
            continue
        xi, yi = int(np.rint(m.p1[0])), int(np.rint(m.p1[1]))
        xj, yj = int(np.rint(m.p2[0])), int(np.rint(m.p2[1]))
        if not (0 <= xi < width and 0 <= yi < height):
            continue
        if not (0 <= xj < width and 0 <= yj < height):
            continue
        pts_i[yi, xi] = X
        conf_i[yi, xi] = 1.0
        pts_j[yj, xj] = R_cw_j @ (X - pose_j.translation)
        conf_j[yj, xj] = 1.0
    return (
        PointMap(width=width, height=height, points=pts_i, confidence=conf_i),
        PointMap(width=width, height=height, points=pts_j, confidence=conf_j),
    )


def _cmd_sfm(opts: dict[str, Any]) -> dict[str, Any]:
    image_dir = Path(opts["images"])
    image_paths = sorted(image_dir.glob("*.drkimg"))
    if len(image_paths) < 2:
        raise DarkSfmError(f"need at least 2 .drkimg files in {image_dir}")
    names = [p.stem for p in image_paths]
    images = [formats.read_image(p) for p in image_paths]
    log.info("loaded %d images", len(images))

    if opts["features"] == "fallback":
        feats = [fallback_descriptors(img, patch=opts["patch"]) for img in images]
    else:
        feat_dir = Path(opts["features"])
        feats = [formats.read_features(feat_dir / f"{n}.drkftr") for n in names]

    named_k, default_k = formats.read_intrinsics(opts["intrinsics"])
    intrinsics = []
    for n, img in zip(names, images):
        k = named_k.get(n, default_k)
        if k is None:
            raise DarkSfmError(f"no intrinsics for image {n}")
        k.warn_if_principal_point_outside(img.width, img.height)
        intrinsics.append(k)

    scores = pairwise_similarity(feats)
    graph = build_graph(scores, k=opts["graph_k"], names=names)
    if opts["graph_out"]:
        lines = [f"{i} {j} {s:.17g}" for (i, j), s in sorted(graph.edges.items())]
        Path(opts["graph_out"]).write_text("\n".join(lines) + "\n")

    matches_dir = Path(opts["matches"]) if opts["matches"] else None
    edge_matches = {}
    for i, j in sorted(graph.edges):
        corr = None
        if matches_dir is not None:
            f = matches_dir / f"{names[i]}__{names[j]}.corr"
            if f.exists():
                corr = formats.read_correspondences(f)
        if corr is None:
            corr = reciprocal_match(feats[i], feats[j], subsample=opts["subsample"])
            # matcher output can contain accidental reciprocal pairs; keep
            # only matches consistent with a two-view epipolar geometry
            if len(corr) >= 8:
                edge_seed = opts["seed"] * 1000003 + i * 1009 + j
                try:
                    _, inliers = estimate_essential_ransac(
                        corr,
                        intrinsics[i],
                        intrinsics[j],
                        threshold=opts["threshold"],
                        seed=edge_seed,
                    )
                    corr = [m for m, good in zip(corr, inliers) if good]
                except DarkSfmError as exc:
                    log.warning("edge (%d, %d) match verification failed: %s", i, j, exc)
        if corr:
            edge_matches[(i, j)] = corr
    log.info("matched %d edges", len(edge_matches))

    pointmaps = {}
    if opts["pointmaps"]:
        pm_dir = Path(opts["pointmaps"])
        per_image = [formats.read_pointmap(pm_dir / f"{n}.drkpts") for n in names]
        for e in edge_matches:
            pointmaps[e] = (per_image[e[0]], per_image[e[1]])
    else:
        for e in sorted(edge_matches):
            pair = _edge_pointmaps_from_geometry(
                e,
                edge_matches[e],
                intrinsics,
                images[e[0]].width,
                images[e[0]].height,
                threshold=opts["threshold"],
                seed=opts["seed"],
            )
            if pair is not None:
                pointmaps[e] = pair

    recon = coarse_align(
        graph,
        pointmaps,
        edge_matches,
        intrinsics=intrinsics,
        refine_rounds=opts["refine_rounds"],
    )
    result = bundle_adjust(
        recon,
        calibrated=intrinsics,
        lambda_intr=opts["lambda_intr"],
        opts=SolverOptions(max_iters=opts["max_iters"]),
    )
    final = result.reconstruction
    formats.write_trajectory(opts["out"], names, final.poses)
    if opts["points"]:
        colors = np.zeros_like(final.points)
        first_obs: dict[int, int] = {}
        for o in range(final.n_observations):
            first_obs.setdefault(int(final.obs_point[o]), o)
        for t, o in first_obs.items():
            c = int(final.obs_cam[o])
            x = min(max(int(np.rint(final.obs_xy[o, 0])), 0), images[c].width - 1)
            y = min(max(int(np.rint(final.obs_xy[o, 1])), 0), images[c].height - 1)
            colors[t] = 255.0 * np.clip(images[c].data[:, y, x], 0.0, 1.0)
        formats.write_ply(opts["points"], final.points, colors)
    return {
        "out": opts["out"],
        "points": opts["points"],
        "n_images": len(names),
        "n_edges": len(edge_matches),
        "n_points": final.n_points,
        "n_observations": final.n_observations,
        "initial_rmse_px": result.initial_rmse,
        "final_rmse_px": result.final_rmse,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
    }


def _cmd_eval_poses(opts: dict[str, Any]) -> dict[str, Any]:
    est = Trajectory(*formats.read_trajectory(opts["est"]))
    ref = Trajectory(*formats.read_trajectory(opts["ref"]))
    sim, est_aligned = align_sim3(est, ref)
    rpe_t, rpe_r = rpe(est_aligned, ref, stride=opts["stride"], reduction=opts["reduction"])
    common = len(set(est.names) & set(ref.names))
    return {
        "ate": ate(est_aligned, ref),
        "rpe_t": rpe_t,
        "rpe_r": rpe_r,
        "n_common": common,
        "sim3_scale": sim.scale,
    }


def _cmd_eval_depth(opts: dict[str, Any]) -> dict[str, Any]:
    pred = formats.read_image(opts["pred"])
    ref = formats.read_image(opts["ref"])
    if opts["median_align"]:
        pred = align_channels_median(pred, ref)
    mask = (pred.data[0] > 0) & (ref.data[0] > 0)
    absrel, delta = depth_metrics(
        DepthPair(predicted=pred.data[0], reference=ref.data[0], mask=mask)
    )
    return {
        "absrel": absrel,
        "delta125": delta,
        "psnr": _json_safe(psnr(pred, ref, peak=opts["peak"])),
        "median_align": bool(opts["median_align"]),
    }


def _cmd_distill_loss(opts: dict[str, Any]) -> dict[str, Any]:
    teacher = formats.read_feature_bundle(opts["teacher"])
    noisy = formats.read_feature_bundle(opts["student_noisy"])
    clean = formats.read_feature_bundle(opts["student_clean"])
    from .adaptation import distill_loss

    loss = distill_loss(
        teacher,
        noisy,
        clean,
        lambda_clean=opts["lambda"],
        per_tensor_mean=opts["per_tensor_mean"],
    )
    return {
        "total": loss.total,
        "loss_noisy": loss.noisy,
        "loss_clean": loss.clean,
        "lambda_clean": opts["lambda"],
    }


# -- argument wiring -----------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with option defaults")
    parser.add_argument("--seed", type=int, help=f"master RNG seed (default {DEFAULT_SEED})")
    parser.add_argument("--threads", type=int, help="bound internal parallelism (0 = all cores)")
    parser.add_argument(
        "--format", "--report", dest="format", choices=["json", "text"],
        help="report format",
    )
    parser.add_argument("--log-level", dest="log_level", help="logging level name")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darksfm",
        description="Low-light structure-from-motion toolkit",
    )
    parser.add_argument("--version", action="version", version=_version_text())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate-noise", help="fit var = a*mean + b per channel")
    p.add_argument("--samples", help="CSV with channel,mean,variance columns")
    p.add_argument("--out", help="noise parameter file to write")
    _add_common(p)

    p = sub.add_parser("simulate", help="synthesize noise at a target SNR")
    p.add_argument("--clean", help="clean input .drkimg (normalized [0,1])")
    p.add_argument("--params", help="noise parameter file")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="target SNR in dB")
    p.add_argument(
        "--snr-range",
        dest="snr_range",
        help="sample the target uniformly in dB from 'lo,hi' (seeded)",
    )
    p.add_argument("--out", help="output .drkimg")
    p.add_argument("--mode", choices=["gaussian", "poisson-gaussian"], help="sampling scheme")
    p.add_argument("--dn-scale", dest="dn_scale", type=float, help="DN per unit input")
    _add_common(p)

    p = sub.add_parser("isp", help="demosaic a raw frame and render a preview")
    p.add_argument("--input", help=".drkraw or 16-bit .pgm")
    p.add_argument("--output", help="output .png or .drkimg")
    p.add_argument("--no-clip", dest="no_clip", action="store_true", default=None)
    p.add_argument("--gamma", type=float, help="gamma exponent")
    p.add_argument("--wb", help="white balance gains r,g,b")
    p.add_argument("--downsample", type=int, help="area downsampling factor")
    p.add_argument("--cfa", choices=["RGGB", "BGGR", "GRBG", "GBRG"], help="CFA for .pgm input")
    p.add_argument("--black-level", dest="black_level", type=float, help="black level for .pgm")
    p.add_argument("--white-level", dest="white_level", type=float, help="white level for .pgm")
    _add_common(p)

    p = sub.add_parser("sfm", help="pose and structure recovery from images + features")
    p.add_argument("--images", help="directory of .drkimg files")
    p.add_argument("--features", help="directory of .drkftr files, or 'fallback'")
    p.add_argument("--matches", help="optional directory of <a>__<b>.corr files")
    p.add_argument("--pointmaps", help="optional directory of .drkpts files")
    p.add_argument("--intrinsics", help="intrinsics text file")
    p.add_argument("--out", help="output poses.txt")
    p.add_argument("--points", help="optional output .ply point cloud")
    p.add_argument("--lambda-intr", dest="lambda_intr", type=float, help="intrinsics prior weight")
    p.add_argument("--graph-k", dest="graph_k", type=int, help="neighbors per node")
    p.add_argument("--graph-out", dest="graph_out", help="dump 'i j score' edge list")
    p.add_argument("--subsample", type=int, help="matching grid stride")
    p.add_argument("--patch", type=int, help="fallback descriptor patch size")
    p.add_argument("--threshold", type=float, help="RANSAC inlier threshold in px")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="bundle adjustment iterations")
    p.add_argument("--refine-rounds", dest="refine_rounds", type=int, help="coarse refinement rounds")
    _add_common(p)

    p = sub.add_parser("eval-poses", help="ATE / RPE against a reference trajectory")
    p.add_argument("--est", help="estimated poses.txt")
    p.add_argument("--ref", help="reference poses.txt")
    p.add_argument("--stride", type=int, help="RPE frame stride")
    p.add_argument("--reduction", choices=["rmse", "mean"], help="RPE reduction")
    _add_common(p)

    p = sub.add_parser("eval-depth", help="AbsRel / delta<1.25 / PSNR on depth images")
    p.add_argument("--pred", help="predicted .drkimg")
    p.add_argument("--ref", help="reference .drkimg")
    p.add_argument("--median-align", dest="median_align", action="store_true", default=None)
    p.add_argument("--peak", type=float, help="PSNR peak value")
    _add_common(p)

    p = sub.add_parser("distill-loss", help="feature-consistency loss between bundles")
    p.add_argument("--teacher", help="teacher bundle dir or .drkbdl")
    p.add_argument("--student-noisy", dest="student_noisy", help="noisy-input student bundle")
    p.add_argument("--student-clean", dest="student_clean", help="clean-input student bundle")
    p.add_argument("--lambda", dest="lambda", type=float, help="clean-term weight")
    p.add_argument("--per-tensor-mean", dest="per_tensor_mean", action="store_true", default=None)
    _add_common(p)
    return parser


_SCHEMAS: dict[str, dict[str, tuple[type, Any]]] = {
    "calibrate-noise": {"samples": (str, REQUIRED), "out": (str, ""), **_GLOBAL_SCHEMA},
    "simulate": {
        "clean": (str, REQUIRED),
        "params": (str, REQUIRED),
        "snr_db": (float, None),  # optional when --snr-range is given
        "snr_range": (str, ""),
        "out": (str, REQUIRED),
        "mode": (str, "gaussian"),
        "dn_scale": (float, FULL_SCALE),
        **_GLOBAL_SCHEMA,
    },
    "isp": {
        "input": (str, REQUIRED),
        "output": (str, REQUIRED),
        "no_clip": (bool, False),
        "gamma": (float, 1.0 / 2.2),
        "wb": (str, "1,1,1"),
        "downsample": (int, 1),
        "cfa": (str, "RGGB"),
        "black_level": (float, 0.0),
        "white_level": (float, FULL_SCALE),
        **_GLOBAL_SCHEMA,
    },
    "sfm": {
        "images": (str, REQUIRED),
        "features": (str, REQUIRED),
        "matches": (str, ""),
        "pointmaps": (str, ""),
        "intrinsics": (str, REQUIRED),
        "out": (str, REQUIRED),
        "points": (str, ""),
        "lambda_intr": (float, 10.0),
        "graph_k": (int, 10),
        "graph_out": (str, ""),
        "subsample": (int, 8),
        "patch": (int, 7),
        "threshold": (float, 2.0),
        "max_iters": (int, 50),
        "refine_rounds": (int, 3),
        **_GLOBAL_SCHEMA,
    },
    "eval-poses": {
        "est": (str, REQUIRED),
        "ref": (str, REQUIRED),
        "stride": (int, 1),
        "reduction": (str, "rmse"),
        **_GLOBAL_SCHEMA,
    },
    "eval-depth": {
        "pred": (str, REQUIRED),
        "ref": (str, REQUIRED),
        "median_align": (bool, False),
        "peak": (float, 1.0),
        **_GLOBAL_SCHEMA,
    },
    "distill-loss": {
        "teacher": (str, REQUIRED),
        "student_noisy": (str, REQUIRED),
        "student_clean": (str, REQUIRED),
        "lambda": (float, 0.3),
        "per_tensor_mean": (bool, False),
        **_GLOBAL_SCHEMA,
    },
}

_COMMANDS = {
    "calibrate-noise": _cmd_calibrate_noise,
    "simulate": _cmd_simulate,
    "isp": _cmd_isp,
    "sfm": _cmd_sfm,
    "eval-poses": _cmd_eval_poses,
    "eval-depth": _cmd_eval_depth,
    "distill-loss": _cmd_distill_loss,
}

# options holding input paths, validated before any work begins
_INPUT_PATHS = {
    "calibrate-noise": ("samples",),
    "simulate": ("clean", "params"),
    "isp": ("input",),
    "sfm": ("images", "intrinsics", "features", "matches", "pointmaps"),
    "eval-poses": ("est", "ref"),
    "eval-depth": ("pred", "ref"),
    "distill-loss": ("teacher", "student_noisy", "student_clean"),
}


def _validate_inputs(command: str, opts: dict[str, Any]) -> None:
    for key in _INPUT_PATHS.get(command, ()):
        value = opts.get(key)
        if not value or (key == "features" and value == "fallback"):
            continue
        if not Path(value).exists():
            raise DarkSfmError(f"input path for --{key.replace('_', '-')} not found: {value}")


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _resolve_options(args, _SCHEMAS[args.command])
        level = getattr(logging, str(opts["log_level"]).upper(), logging.WARNING)
        logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
        if opts["threads"] < 0:
            raise DarkSfmError("--threads must be >= 0")
        _validate_inputs(args.command, opts)
        report = _COMMANDS[args.command](opts)
    except (DarkSfmError, OSError, ValueError) as exc:
        # domain types raise ValueError on invariant violations; surface
        # those the same structured way as toolkit errors
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1
    _emit_report(report, opts["format"])
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
