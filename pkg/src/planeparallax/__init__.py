"""Plane+parallax geometry: road-plane homographies, residual parallax,
view synthesis, photometric losses and a plane-sweep depth solver."""
from .geometry import (
    BehindCameraError,
    CameraIntrinsics,
    DepthMap,
    GammaMap,
    PlaneModel,
    RigidMotion,
    backproject,
    depth_from_gamma,
    gamma_from_depth,
    point_plane_height,
    project,
)
from .homography import (
    DegenerateConfigurationError,
    EstimationError,
    Homography,
    PointAtInfinityError,
    RansacConfig,
    apply_homography,
    compose_plane_homography,
    estimate_homography_dlt,
    estimate_homography_ransac,
    warp_image_homography,
)
from .losses import LossConfig, min_reprojection, photometric_loss, smoothness_loss, ssim_map, total_loss
from .parallax import (
    ParallaxSingularityError,
    full_reprojection_oracle,
    planar_parallax_map,
    residual_parallax,
    synthesize_target,
)
from .solver import (
    DepthMetrics,
    SweepConfig,
    eval_metrics,
    fit_plane_normal,
    median_scale,
    plane_sweep_gamma,
)
from .synthetic import SceneSpec, render_synthetic

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError",
    "CameraIntrinsics",
    "DegenerateConfigurationError",
    "DepthMap",
    "DepthMetrics",
    "EstimationError",
    "GammaMap",
    "Homography",
    "LossConfig",
    "ParallaxSingularityError",
    "PlaneModel",
    "PointAtInfinityError",
    "RansacConfig",
    "RigidMotion",
    "SceneSpec",
    "SweepConfig",
    "apply_homography",
    "backproject",
    "compose_plane_homography",
    "depth_from_gamma",
    "estimate_homography_dlt",
    "estimate_homography_ransac",
    "eval_metrics",
    "fit_plane_normal",
    "full_reprojection_oracle",
    "gamma_from_depth",
    "median_scale",
    "min_reprojection",
    "photometric_loss",
    "planar_parallax_map",
    "plane_sweep_gamma",
    "point_plane_height",
    "project",
    "render_synthetic",
    "residual_parallax",
    "smoothness_loss",
    "ssim_map",
    "synthesize_target",
    "total_loss",
    "warp_image_homography",
]
