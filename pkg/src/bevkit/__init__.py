"""Geometry, augmentation, domain-binning, and evaluation tools for surround-camera 3D perception."""

from .augment import (
    AugmentedView,
    DegenerateFitError,
    Homography,
    MatchedPairSet,
    PerturbationRange,
    analytic_homography,
    augment_scene,
    collect_pairs,
    fit_homography,
    perturb_pose,
)
from .boxes import Box3D, bottom_points, footprint_corners
from .depth import (
    DATASET_DEPTH_RANGES,
    DepthDecouplingConfig,
    DepthRangeError,
    metric_to_scale_invariant,
    pixel_size,
    resize_intrinsics,
    scale_invariant_to_metric,
)
from .geometry import (
    CameraModel,
    DegenerateProjectionError,
    EulerAngles,
    Intrinsics,
    Pose,
    ego_to_camera_rotation,
    euler_to_rotation,
    in_image,
    project_point,
    rotation_to_euler,
    wrap_angle,
)
from .metrics import (
    DetectionRecord,
    Match,
    MetricConfig,
    MetricReport,
    UndefinedAPError,
    aligned_iou,
    average_precision,
    evaluate,
    ground_distance,
    match_detections,
    nds_star,
    tp_errors,
    yaw_difference,
)
from .ordinal import (
    DATASET_SCHEMES,
    OrdinalDomainScheme,
    assign_label,
    decode_label,
    make_scheme,
    ordinal_loss,
    ordinal_loss_grad,
    reverse_gradient,
)
from .pnm import read_pnm, write_pnm
from .scene import RunConfig, Scene, generate_synthetic_scene, render_pattern_image
from .selftest import run_selftest
from .warp import warp_image

__version__ = "0.1.0"
