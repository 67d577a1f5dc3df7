"""Cross-view translation: reproject exocentric RGB-D into an egocentric camera.

The pipeline recovers metric scale from a hand-region depth reference, aligns
the views through a least-squares similarity fit on hand keypoints, and
z-buffer splats the exocentric pixels into the egocentric frame. Around it:
hand-skeleton conditioning maps, diffusion-sampling arithmetic for latent
inpainting, image metrics, seeded synthetic scenes with an independent oracle
renderer, and file formats plus a CLI.
"""

from .alignment import (
    DegenerateConfigurationError,
    HandPose,
    InsufficientPointsError,
    alignment_residual,
    exo_to_ego_transform,
    umeyama,
)
from .calibration import (
    EmptyRegionError,
    InvalidSampleError,
    ScaleFactor,
    apply_scale,
    compute_scale,
    hand_region_from_depth,
)
from .diffusion import (
    ConditioningBundle,
    DownsampleCodec,
    IdentityCodec,
    NoiseSchedule,
    SubprocessDenoiser,
    assemble_latent,
    cfg_combine,
    channel_reduce,
    denoiser_loss,
    forward_noise,
    linear_beta_schedule,
    make_oracle_denoiser,
    predict_x0,
    reverse_sample,
)
from .geometry import (
    CameraIntrinsics,
    PointCloud,
    SimilarityTransform,
    SparseEgoMap,
    apply_transform,
    compose_transforms,
    depth_validity,
    invert_transform,
    project_points,
    unproject,
)
from .metrics import SsimParams, mse, psnr, ssim
from .reprojection import (
    HAND_PARENTS,
    NoValidDepthError,
    PoseMapStyle,
    build_sparse_ego_map,
    rasterize_pose_map,
)
from .synthetic import (
    SceneConfig,
    SyntheticScene,
    ground_truth_transform,
    hand_depth_map,
    hand_pose_in_camera,
    make_scene,
    occlusion_edge_mask,
    oracle_render,
)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "ConditioningBundle",
    "DegenerateConfigurationError",
    "DownsampleCodec",
    "EmptyRegionError",
    "HAND_PARENTS",
    "HandPose",
    "IdentityCodec",
    "InsufficientPointsError",
    "InvalidSampleError",
    "NoiseSchedule",
    "NoValidDepthError",
    "PointCloud",
    "PoseMapStyle",
    "ScaleFactor",
    "SceneConfig",
    "SimilarityTransform",
    "SparseEgoMap",
    "SsimParams",
    "SubprocessDenoiser",
    "SyntheticScene",
    "alignment_residual",
    "apply_scale",
    "apply_transform",
    "assemble_latent",
    "cfg_combine",
    "channel_reduce",
    "compose_transforms",
    "compute_scale",
    "denoiser_loss",
    "depth_validity",
    "exo_to_ego_transform",
    "forward_noise",
    "ground_truth_transform",
    "hand_depth_map",
    "hand_pose_in_camera",
    "hand_region_from_depth",
    "invert_transform",
    "linear_beta_schedule",
    "make_oracle_denoiser",
    "make_scene",
    "mse",
    "occlusion_edge_mask",
    "oracle_render",
    "predict_x0",
    "project_points",
    "psnr",
    "rasterize_pose_map",
    "reverse_sample",
    "ssim",
    "umeyama",
    "unproject",
    "build_sparse_ego_map",
]
