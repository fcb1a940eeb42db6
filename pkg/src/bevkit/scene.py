"""Scene containers, JSON serialization, and the synthetic scene generator.

All files are UTF-8 JSON with angles in radians and lengths in meters;
``dumps_canonical`` fixes key order and indentation so identical inputs
produce byte-identical files.  The corresponding schema documents live
under docs/schemas/.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .augment import PerturbationRange
from .boxes import Box3D
from .depth import DepthDecouplingConfig
from .geometry import CameraModel, Intrinsics, Pose, ego_to_camera_rotation
from .metrics import DetectionRecord, MetricConfig
from .ordinal import DATASET_SCHEMES, OrdinalDomainScheme, make_scheme

__all__ = [
    "SCHEMA_VERSION",
    "RIG_STYLES",
    "Scene",
    "RunConfig",
    "dumps_canonical",
    "scene_to_dict",
    "scene_from_dict",
    "run_config_to_dict",
    "run_config_from_dict",
    "pose_to_dict",
    "pose_from_dict",
    "box_to_dict",
    "box_from_dict",
    "records_to_dict",
    "records_from_dict",
    "generate_synthetic_scene",
    "render_pattern_image",
]

SCHEMA_VERSION = 1

# Supported synthetic rig layouts: a full surround ring or a forward arc.
RIG_STYLES = ("ring", "frontal")


@dataclass(frozen=True)
class Scene:
    scene_id: str
    cameras: tuple[CameraModel, ...]
    boxes: tuple[Box3D, ...]
    image_paths: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        ids = [cam.camera_id for cam in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError(f"camera ids must be unique, got {ids!r}")
        if self.image_paths is not None:
            paths = tuple(str(p) for p in self.image_paths)
            if len(paths) != len(self.cameras):
                raise ValueError(
                    f"got {len(paths)} image paths for {len(self.cameras)} cameras"
                )
            object.__setattr__(self, "image_paths", paths)


@dataclass(frozen=True)
class RunConfig:
    """Seed plus the per-module configurations a pipeline run needs."""

    seed: int = 0
    perturbation: PerturbationRange = field(default_factory=PerturbationRange)
    depth: DepthDecouplingConfig = field(default_factory=DepthDecouplingConfig)
    scheme: OrdinalDomainScheme = field(default_factory=lambda: DATASET_SCHEMES["nuscenes"])
    metrics: MetricConfig = field(default_factory=MetricConfig)


def dumps_canonical(data) -> str:
    """Deterministic JSON: sorted keys, fixed indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise ValueError(f"{context}: missing required key {key!r}")
    return data[key]


def intrinsics_to_dict(intr: Intrinsics) -> dict:
    return {
        "fx": intr.fx,
        "fy": intr.fy,
        "px": intr.px,
        "py": intr.py,
        "width": intr.width,
        "height": intr.height,
    }


def intrinsics_from_dict(data: dict) -> Intrinsics:
    return Intrinsics(
        fx=float(_require(data, "fx", "intrinsics")),
        fy=float(_require(data, "fy", "intrinsics")),
        px=float(_require(data, "px", "intrinsics")),
        py=float(_require(data, "py", "intrinsics")),
        width=int(_require(data, "width", "intrinsics")),
        height=int(_require(data, "height", "intrinsics")),
    )


def pose_to_dict(pose: Pose) -> dict:
    return {"yaw": pose.yaw, "pitch": pose.pitch, "roll": pose.roll, "t": list(pose.translation)}


def pose_from_dict(data: dict) -> Pose:
    return Pose(
        yaw=float(_require(data, "yaw", "pose")),
        pitch=float(_require(data, "pitch", "pose")),
        roll=float(_require(data, "roll", "pose")),
        translation=tuple(float(v) for v in _require(data, "t", "pose")),
    )


def camera_to_dict(cam: CameraModel) -> dict:
    return {
        "camera_id": cam.camera_id,
        "intrinsics": intrinsics_to_dict(cam.intrinsics),
        "pose": pose_to_dict(cam.pose),
    }


def camera_from_dict(data: dict) -> CameraModel:
    return CameraModel(
        intrinsics=intrinsics_from_dict(_require(data, "intrinsics", "camera")),
        pose=pose_from_dict(_require(data, "pose", "camera")),
        camera_id=str(_require(data, "camera_id", "camera")),
    )


def box_to_dict(box: Box3D) -> dict:
    data = {
        "center": list(box.center),
        "dims": list(box.dims),
        "yaw": box.yaw,
        "class_id": box.class_id,
    }
    if box.score is not None:
        data["score"] = box.score
    return data


def box_from_dict(data: dict) -> Box3D:
    return Box3D(
        center=tuple(float(v) for v in _require(data, "center", "box")),
        dims=tuple(float(v) for v in _require(data, "dims", "box")),
        yaw=float(_require(data, "yaw", "box")),
        class_id=str(data.get("class_id", "vehicle")),
        score=None if data.get("score") is None else float(data["score"]),
    )


def scene_to_dict(scene: Scene) -> dict:
    data = {
        "schema_version": SCHEMA_VERSION,
        "scene_id": scene.scene_id,
        "cameras": [camera_to_dict(cam) for cam in scene.cameras],
        "boxes": [box_to_dict(box) for box in scene.boxes],
    }
    if scene.image_paths is not None:
        data["image_paths"] = list(scene.image_paths)
    return data


def scene_from_dict(data: dict) -> Scene:
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scene schema_version {version!r}")
    paths = data.get("image_paths")
    return Scene(
        scene_id=str(_require(data, "scene_id", "scene")),
        cameras=tuple(camera_from_dict(c) for c in _require(data, "cameras", "scene")),
        boxes=tuple(box_from_dict(b) for b in _require(data, "boxes", "scene")),
        image_paths=None if paths is None else tuple(str(p) for p in paths),
    )


def records_to_dict(records: list[DetectionRecord]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "records": [dict(box_to_dict(r.box), sample_id=r.sample_id) for r in records],
    }


def records_from_dict(data: dict) -> list[DetectionRecord]:
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported records schema_version {version!r}")
    records = []
    for entry in _require(data, "records", "records"):
        records.append(
            DetectionRecord(box=box_from_dict(entry), sample_id=str(_require(entry, "sample_id", "record")))
        )
    return records


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "perturbation": {
            "d_yaw": cfg.perturbation.d_yaw,
            "d_pitch": cfg.perturbation.d_pitch,
            "d_roll": cfg.perturbation.d_roll,
            "seed": cfg.perturbation.seed,
        },
        "depth": {
            "reference_pixel_size": cfg.depth.reference_pixel_size,
            "metric_depth_range": list(cfg.depth.metric_depth_range),
        },
        "scheme": {
            "alpha": cfg.scheme.alpha,
            "beta": cfg.scheme.beta,
            "num_subintervals": cfg.scheme.num_subintervals,
        },
        "metrics": {
            "distance_thresholds": list(cfg.metrics.distance_thresholds),
            "tp_threshold": cfg.metrics.tp_threshold,
            "range_limit": cfg.metrics.range_limit,
            "recall_floor": cfg.metrics.recall_floor,
            "precision_floor": cfg.metrics.precision_floor,
        },
    }


def run_config_from_dict(data: dict) -> RunConfig:
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported run config schema_version {version!r}")
    kwargs = {}
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "perturbation" in data:
        p = data["perturbation"]
        kwargs["perturbation"] = PerturbationRange(
            d_yaw=float(p.get("d_yaw", 0.02)),
            d_pitch=float(p.get("d_pitch", 0.01)),
            d_roll=float(p.get("d_roll", 0.02)),
            seed=int(p.get("seed", kwargs.get("seed", 0))),
        )
    if "depth" in data:
        d = data["depth"]
        depth_kwargs = {}
        if "reference_pixel_size" in d:
            depth_kwargs["reference_pixel_size"] = float(d["reference_pixel_size"])
        if "metric_depth_range" in d:
            depth_kwargs["metric_depth_range"] = tuple(float(v) for v in d["metric_depth_range"])
        kwargs["depth"] = DepthDecouplingConfig(**depth_kwargs)
    if "scheme" in data:
        s = data["scheme"]
        kwargs["scheme"] = make_scheme(
            float(_require(s, "alpha", "scheme")),
            float(_require(s, "beta", "scheme")),
            int(_require(s, "num_subintervals", "scheme")),
        )
    if "metrics" in data:
        m = data["metrics"]
        metric_kwargs = {}
        if "distance_thresholds" in m:
            metric_kwargs["distance_thresholds"] = tuple(float(v) for v in m["distance_thresholds"])
        for key in ("tp_threshold", "range_limit", "recall_floor", "precision_floor"):
            if key in m:
                metric_kwargs[key] = float(m[key])
        kwargs["metrics"] = MetricConfig(**metric_kwargs)
    return RunConfig(**kwargs)


def _ring_yaws(n_cameras: int, style: str) -> list[float]:
    if style == "ring":
        return [2.0 * math.pi * i / n_cameras for i in range(n_cameras)]
    # frontal: evenly spread over a forward arc
    spread = 0.6 * math.pi
    return [(-spread + 2.0 * spread * i / (n_cameras - 1)) for i in range(n_cameras)]


def generate_synthetic_scene(
    seed: int,
    n_cameras: int = 6,
    n_boxes: int = 12,
    rig_style: str = "ring",
    scheme: OrdinalDomainScheme | None = None,
) -> Scene:
    """Deterministic desk-scale scene: a camera rig plus ground-level boxes.

    Cameras sit on a small circle around the ego origin at roughly roof
    height, headings laid out by ``rig_style``, with focal lengths drawn
    inside the ordinal scheme interval.  Boxes are vehicle-sized, on the
    ground, within +-50 m.  Randomness is keyed by (seed, kind, index) so
    generation order cannot change the output.
    """
    if n_cameras not in (5, 6):
        raise ValueError(f"n_cameras must be 5 or 6, got {n_cameras}")
    if n_boxes < 0:
        raise ValueError(f"n_boxes must be >= 0, got {n_boxes}")
    if rig_style not in RIG_STYLES:
        raise ValueError(f"unsupported rig_style {rig_style!r}; supported: {RIG_STYLES}")
    scheme = scheme or DATASET_SCHEMES["nuscenes"]

    cameras = []
    for index, yaw in enumerate(_ring_yaws(n_cameras, rig_style)):
        rng = np.random.default_rng([int(seed), 0, index])
        focal = float(rng.uniform(scheme.alpha, scheme.beta))
        width, height = 704, 256
        intr = Intrinsics(
            fx=focal,
            fy=focal,
            px=width / 2.0 + float(rng.uniform(-2.0, 2.0)),
            py=height / 2.0 + float(rng.uniform(-2.0, 2.0)),
            width=width,
            height=height,
        )
        pose_angles = Pose(
            yaw=yaw,
            pitch=float(rng.uniform(-0.03, 0.0)),
            roll=float(rng.uniform(-0.005, 0.005)),
        )
        # camera center on a 1.5 m circle at 1.6 m height; t = -R @ center
        center = np.array([1.5 * math.cos(yaw), 1.5 * math.sin(yaw), 1.6])
        translation = -(ego_to_camera_rotation(pose_angles) @ center)
        pose = Pose(
            yaw=pose_angles.yaw,
            pitch=pose_angles.pitch,
            roll=pose_angles.roll,
            translation=tuple(float(v) for v in translation),
        )
        cameras.append(CameraModel(intr, pose, f"cam_{index:02d}"))

    boxes = []
    for index in range(n_boxes):
        rng = np.random.default_rng([int(seed), 1, index])
        radius = float(rng.uniform(6.0, 45.0))
        bearing = float(rng.uniform(-math.pi, math.pi))
        dims = (
            float(rng.uniform(3.8, 5.2)),
            float(rng.uniform(1.6, 2.1)),
            float(rng.uniform(1.4, 1.9)),
        )
        boxes.append(
            Box3D(
                center=(radius * math.cos(bearing), radius * math.sin(bearing), dims[2] / 2.0),
                dims=dims,
                yaw=float(rng.uniform(-math.pi, math.pi)),
                class_id="vehicle",
            )
        )

    return Scene(scene_id=f"synthetic-{seed}", cameras=tuple(cameras), boxes=tuple(boxes))


def render_pattern_image(width: int, height: int, camera_index: int = 0) -> np.ndarray:
    """Deterministic textured test raster (uint8 graymap) for warp pipelines."""
    x = np.arange(width)
    y = np.arange(height)[:, None]
    pattern = (3 * x + 5 * y + 17 * camera_index) % 251
    return pattern.astype(np.uint8)
