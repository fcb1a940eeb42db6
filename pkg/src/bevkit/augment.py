"""Perspective augmentation: pose perturbation, anchor matching, homography.

The augmentation pipeline for one camera:

1. draw a random offset for each pose angle,
2. project the 5 bottom anchor points of every box with the original and
   the perturbed pose, keeping pairs visible in both views,
3. with at least 4 pairs, fit the homography that maps original pixels to
   perturbed pixels (DLT, least squares); otherwise fall back to the
   identity and leave the image untouched,
4. warp the image with the fitted map.

The closed-form plane-induced homography K (R + t n^T / d) K^-1 between
the two camera frames is the oracle used to validate the fitted result;
for a pure rotation (zero relative translation) it is independent of the
plane, so the fitted map is exact for every scene point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .boxes import Box3D, bottom_points
from .geometry import (
    CameraModel,
    DegenerateProjectionError,
    Pose,
    ego_to_camera_rotation,
    in_image,
    project_point,
)
from .warp import warp_image

__all__ = [
    "MIN_PAIRS_FOR_FIT",
    "DegenerateFitError",
    "PerturbationRange",
    "Homography",
    "MatchedPairSet",
    "AugmentedView",
    "perturb_pose",
    "collect_pairs",
    "fit_homography",
    "analytic_homography",
    "augment_scene",
]

# Below this many correspondences the 8-dof fit is underdetermined and the
# camera falls back to the identity map.
MIN_PAIRS_FOR_FIT = 4

_PROVENANCES = ("fitted", "analytic", "identity-fallback")


class DegenerateFitError(ValueError):
    """Correspondences do not determine a unique homography."""


@dataclass(frozen=True)
class PerturbationRange:
    """Half-widths (radians) of the uniform angle offsets, plus the RNG seed."""

    d_yaw: float = 0.02
    d_pitch: float = 0.01
    d_roll: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("d_yaw", "d_pitch", "d_roll"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be a non-negative half-width, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class Homography:
    """3x3 projective map between two image planes, q_perturbed ~ H q.

    The stored matrix is gauge-normalized: unit Frobenius norm with the
    last element non-negative, so equal maps compare equal.  ``provenance``
    records how the matrix was obtained: "fitted" (least squares on
    correspondences), "analytic" (closed form from known motion), or
    "identity-fallback" (too few correspondences).
    """

    matrix: np.ndarray
    provenance: str = "analytic"

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
            raise ValueError("homography must be a finite 3x3 matrix")
        norm = float(np.linalg.norm(matrix))
        if norm == 0.0:
            raise ValueError("homography matrix is zero")
        matrix = matrix / norm
        if matrix[2, 2] < 0.0:
            matrix = -matrix
        elif matrix[2, 2] == 0.0:
            anchor = matrix.flat[np.argmax(np.abs(matrix))]
            if anchor < 0.0:
                matrix = -matrix
        if abs(np.linalg.det(matrix)) < 1e-12:
            raise ValueError("homography is singular")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"provenance must be one of {_PROVENANCES}, got {self.provenance!r}")

    @classmethod
    def identity_fallback(cls) -> "Homography":
        return cls(np.eye(3), provenance="identity-fallback")

    def is_identity(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.matrix - np.eye(3) / math.sqrt(3.0)).max() <= tol)

    def apply(self, pixels: np.ndarray) -> np.ndarray:
        """Map (n, 2) or (2,) pixels through the homography and dehomogenize."""
        pts = np.atleast_2d(np.asarray(pixels, dtype=float))
        ones = np.ones((pts.shape[0], 1))
        mapped = np.hstack([pts, ones]) @ self.matrix.T
        out = mapped[:, :2] / mapped[:, 2:3]
        return out[0] if np.asarray(pixels).ndim == 1 else out

    def row_major(self) -> list[float]:
        return [float(v) for v in self.matrix.reshape(-1)]


@dataclass(frozen=True)
class MatchedPairSet:
    """Pixel correspondences between the original and perturbed views.

    ``source`` and ``target`` are (n, 2) arrays; row i of each is one kept
    pair (q_i, q_hat_i).  Every stored pixel passed the in-image test with
    positive depth at collection time.
    """

    camera_id: str
    source: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    target: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self) -> None:
        source = np.asarray(self.source, dtype=float).reshape(-1, 2)
        target = np.asarray(self.target, dtype=float).reshape(-1, 2)
        if source.shape != target.shape:
            raise ValueError(f"source/target shape mismatch: {source.shape} vs {target.shape}")
        source.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)

    def __len__(self) -> int:
        return self.source.shape[0]


class AugmentedView(NamedTuple):
    image: np.ndarray
    pose: Pose
    homography: Homography


def perturb_pose(pose: Pose, limits: PerturbationRange, rng: np.random.Generator) -> Pose:
    """Offset each angle by a uniform draw in [-half-width, +half-width].

    Draw order is fixed (yaw, pitch, roll) so a seeded generator gives
    bitwise-reproducible results.  Translation is unchanged.
    """
    d_yaw = float(rng.uniform(-limits.d_yaw, limits.d_yaw))
    d_pitch = float(rng.uniform(-limits.d_pitch, limits.d_pitch))
    d_roll = float(rng.uniform(-limits.d_roll, limits.d_roll))
    return Pose(
        yaw=pose.yaw + d_yaw,
        pitch=pose.pitch + d_pitch,
        roll=pose.roll + d_roll,
        translation=pose.translation,
    )


def collect_pairs(cam: CameraModel, perturbed: Pose, boxes: Sequence[Box3D]) -> MatchedPairSet:
    """Project box bottom anchors with both poses and keep the co-visible pairs.

    A pair survives iff both depths are positive and both pixels land
    inside the image.  An empty result is valid (no boxes in view).
    """
    perturbed_cam = CameraModel(cam.intrinsics, perturbed, cam.camera_id)
    source: list[np.ndarray] = []
    target: list[np.ndarray] = []
    for box in boxes:
        for anchor in bottom_points(box):
            try:
                pixel, depth = project_point(cam, anchor)
                pixel_hat, depth_hat = project_point(perturbed_cam, anchor)
            except DegenerateProjectionError:
                continue
            if depth <= 0.0 or depth_hat <= 0.0:
                continue
            if not (in_image(cam.intrinsics, pixel) and in_image(cam.intrinsics, pixel_hat)):
                continue
            source.append(pixel)
            target.append(pixel_hat)
    if not source:
        return MatchedPairSet(cam.camera_id)
    return MatchedPairSet(cam.camera_id, np.array(source), np.array(target))


def _hartley_normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking the points to centroid 0, mean radius sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_dist = float(np.linalg.norm(points - centroid, axis=1).mean())
    scale = math.sqrt(2.0) / mean_dist if mean_dist > 0.0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def fit_homography(pairs: MatchedPairSet) -> Homography:
    """Least-squares homography from pixel correspondences (normalized DLT).

    Fewer than MIN_PAIRS_FOR_FIT pairs returns the identity fallback.
    Each pair contributes the two independent rows of q_hat x (H q) = 0;
    the solution is the right singular vector of the smallest singular
    value, computed on Hartley-normalized coordinates for conditioning.
    With exact correspondences the generating map is recovered.

    Raises DegenerateFitError when the correspondences leave the 8-dof
    system rank deficient (for example all points collinear).
    """
    if len(pairs) < MIN_PAIRS_FOR_FIT:
        return Homography.identity_fallback()

    t_src = _hartley_normalization(pairs.source)
    t_dst = _hartley_normalization(pairs.target)
    ones = np.ones((len(pairs), 1))
    src = np.hstack([pairs.source, ones]) @ t_src.T
    dst = np.hstack([pairs.target, ones]) @ t_dst.T

    rows = []
    for (x, y, _), (xh, yh, _) in zip(src, dst):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, xh * x, xh * y, xh])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, yh * x, yh * y, yh])
    system = np.array(rows)

    _, singular, vt = np.linalg.svd(system)
    rank = int(np.sum(singular > 1e-9 * singular[0])) if singular[0] > 0.0 else 0
    if rank < 8:
        raise DegenerateFitError(
            f"correspondences for {pairs.camera_id!r} are degenerate: system rank {rank} < 8"
        )
    matrix = np.linalg.inv(t_dst) @ vt[-1].reshape(3, 3) @ t_src
    return Homography(matrix, provenance="fitted")


def relative_camera_motion(original: Pose, perturbed: Pose) -> tuple[np.ndarray, np.ndarray]:
    """(rotation, translation) mapping original-camera coords to perturbed-camera coords."""
    r1 = ego_to_camera_rotation(original)
    r2 = ego_to_camera_rotation(perturbed)
    rotation = r2 @ r1.T
    translation = perturbed.translation_vector() - rotation @ original.translation_vector()
    return rotation, translation


def analytic_homography(
    cam: CameraModel,
    perturbed: Pose,
    plane_normal: Sequence[float] = (0.0, 0.0, 1.0),
    plane_distance: float = 1.0,
) -> Homography:
    """Closed-form homography induced by a plane, H = K (R + t n^T / d) K^-1.

    (R, t) is the relative motion between the original and perturbed
    camera frames; (n, d) describe the plane n . X = d in the original
    camera frame.  When the relative translation is zero (pure rotation)
    the result is independent of the plane and exact for all of space,
    which is what makes it usable as an oracle for fit_homography.
    """
    plane_distance = float(plane_distance)
    if not math.isfinite(plane_distance) or plane_distance <= 0.0:
        raise ValueError(f"plane_distance must be positive, got {plane_distance!r}")
    normal = np.asarray(plane_normal, dtype=float)
    if normal.shape != (3,) or not np.all(np.isfinite(normal)) or np.linalg.norm(normal) == 0.0:
        raise ValueError(f"plane_normal must be a finite non-zero 3-vector, got {plane_normal!r}")

    rotation, translation = relative_camera_motion(cam.pose, perturbed)
    k = cam.intrinsics.matrix()
    core = rotation + np.outer(translation, normal) / plane_distance
    return Homography(k @ core @ np.linalg.inv(k), provenance="analytic")


def _augment_camera(
    cam: CameraModel,
    image: np.ndarray,
    boxes: Sequence[Box3D],
    limits: PerturbationRange,
    camera_index: int,
) -> AugmentedView:
    rng = np.random.default_rng([limits.seed, camera_index])
    perturbed = perturb_pose(cam.pose, limits, rng)
    if perturbed == cam.pose:
        # Zero offsets: the exact map is the identity, skip the fit so the
        # raster is returned untouched.
        return AugmentedView(image, cam.pose, Homography(np.eye(3), provenance="analytic"))
    pairs = collect_pairs(cam, perturbed, boxes)
    if len(pairs) < MIN_PAIRS_FOR_FIT:
        # The image stays unwarped, so the pose that matches it is the
        # original one.
        return AugmentedView(image, cam.pose, Homography.identity_fallback())
    homography = fit_homography(pairs)
    warped = warp_image(image, homography, (cam.intrinsics.width, cam.intrinsics.height))
    return AugmentedView(warped, perturbed, homography)


def augment_scene(
    rig: Sequence[CameraModel],
    images: Sequence[np.ndarray],
    boxes: Sequence[Box3D],
    limits: PerturbationRange,
    workers: int = 1,
) -> list[AugmentedView]:
    """Perturb, fit, and warp every camera of a rig.

    Randomness is keyed by (seed, camera index), so results are identical
    across runs and across worker counts.  Cameras whose fit falls back to
    the identity keep their original image and pose.
    """
    if len(rig) != len(images):
        raise ValueError(f"got {len(rig)} cameras but {len(images)} images")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(rig) <= 1:
        return [
            _augment_camera(cam, image, boxes, limits, index)
            for index, (cam, image) in enumerate(zip(rig, images))
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_augment_camera, cam, image, boxes, limits, index)
            for index, (cam, image) in enumerate(zip(rig, images))
        ]
        return [future.result() for future in futures]
