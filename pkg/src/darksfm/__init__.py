"""darksfm: low-light structure-from-motion toolkit.

Raw Bayer preprocessing, Poisson-Gaussian noise calibration and synthesis,
dense-descriptor matching with epipolar scoring, two-view geometry, scene
graphs, global reconstruction with bundle adjustment, feature-consistency
loss arithmetic, and trajectory/depth/photometric evaluation.
"""

from .adaptation import DistillLoss, FeatureBundle, LoraDelta, distill_loss, lora_merge
from .errors import (
    AmbiguousPoseError,
    DarkSfmError,
    DegenerateGeometryError,
    DimensionError,
    DisconnectedGraphError,
    FileFormatError,
    InsufficientDataError,
    LowParallaxError,
    NumericalError,
    ShapeMismatchError,
    UnreachableSnrError,
    UnsupportedFormatError,
)
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
    essential_from_pose,
    project_points,
    recover_pose,
    triangulate,
)
from .global_recon import (
    BundleAdjustResult,
    Reconstruction,
    SolverOptions,
    bundle_adjust,
    coarse_align,
)
from .matching import (
    Correspondence,
    FeatureMap,
    fallback_descriptors,
    reciprocal_match,
    symmetric_epipolar_distance,
)
from .noise_model import (
    MeanVarSample,
    NoiseParams,
    calibrate,
    predicted_snr,
    synthesize,
)
from .raw_pipeline import (
    IspConfig,
    LinearImage,
    RawImage,
    apply_isp,
    demosaic_subsample,
    downsample_area,
    measure_snr,
)
from .scene_graph import SceneGraph, build_graph, pairwise_similarity
from .sim3 import Sim3, estimate_sim3_weighted

__version__ = "0.1.0"

__all__ = [
    "AmbiguousPoseError",
    "BundleAdjustResult",
    "Correspondence",
    "DarkSfmError",
    "DegenerateGeometryError",
    "DepthPair",
    "DimensionError",
    "DisconnectedGraphError",
    "DistillLoss",
    "FeatureBundle",
    "FeatureMap",
    "FileFormatError",
    "InsufficientDataError",
    "Intrinsics",
    "IspConfig",
    "LinearImage",
    "LoraDelta",
    "LowParallaxError",
    "MeanVarSample",
    "NoiseParams",
    "NumericalError",
    "PointMap",
    "Pose",
    "RawImage",
    "Reconstruction",
    "SceneGraph",
    "ShapeMismatchError",
    "Sim3",
    "SolverOptions",
    "Trajectory",
    "UnreachableSnrError",
    "UnsupportedFormatError",
    "align_channels_median",
    "align_sim3",
    "apply_isp",
    "ate",
    "build_graph",
    "bundle_adjust",
    "calibrate",
    "coarse_align",
    "demosaic_subsample",
    "depth_metrics",
    "distill_loss",
    "downsample_area",
    "estimate_essential_ransac",
    "estimate_sim3_weighted",
    "essential_from_pose",
    "fallback_descriptors",
    "lora_merge",
    "measure_snr",
    "pairwise_similarity",
    "predicted_snr",
    "project_points",
    "psnr",
    "reciprocal_match",
    "recover_pose",
    "rpe",
    "symmetric_epipolar_distance",
    "synthesize",
    "triangulate",
]
