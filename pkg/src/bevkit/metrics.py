"""Center-distance detection metrics: AP, TP errors, and the NDS* aggregate.

Matching uses ground-plane center distance instead of IoU: detections are
visited in descending score and greedily claim the nearest unmatched
ground truth of the same sample within the distance threshold.  Average
precision integrates the interpolated precision-recall curve on a
101-point recall grid above configurable recall and precision floors.
True-positive errors (translation, scale, orientation) are plain means
over the matches at a single threshold, and the summary score is

    NDS* = (3 * mAP + sum over the three errors of (1 - min(1, err))) / 6.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .boxes import Box3D

__all__ = [
    "UndefinedAPError",
    "DetectionRecord",
    "MetricConfig",
    "MetricReport",
    "Match",
    "ground_distance",
    "aligned_iou",
    "yaw_difference",
    "match_detections",
    "average_precision",
    "tp_errors",
    "nds_star",
    "evaluate",
]


class UndefinedAPError(ValueError):
    """Average precision is undefined without ground truths."""


@dataclass(frozen=True)
class DetectionRecord:
    """A box tied to the sample (frame) it was observed in."""

    box: Box3D
    sample_id: str

    def __post_init__(self) -> None:
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise ValueError(f"sample_id must be a non-empty string, got {self.sample_id!r}")


@dataclass(frozen=True)
class MetricConfig:
    """Evaluation protocol constants.

    Defaults: AP at 0.5/1/2/4 m matching thresholds, TP errors at 2 m,
    boxes kept within 50 m ground-plane range, and 0.1 recall/precision
    floors under the AP integral.
    """

    distance_thresholds: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    tp_threshold: float = 2.0
    range_limit: float = 50.0
    recall_floor: float = 0.1
    precision_floor: float = 0.1

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.distance_thresholds)
        if not thresholds or any(t <= 0.0 for t in thresholds):
            raise ValueError(f"distance thresholds must be positive, got {thresholds!r}")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"distance thresholds must be ascending, got {thresholds!r}")
        object.__setattr__(self, "distance_thresholds", thresholds)
        object.__setattr__(self, "tp_threshold", float(self.tp_threshold))
        if self.tp_threshold not in thresholds:
            raise ValueError(f"tp_threshold {self.tp_threshold} not among {thresholds!r}")
        if self.range_limit <= 0.0:
            raise ValueError(f"range_limit must be positive, got {self.range_limit!r}")
        for name in ("recall_floor", "precision_floor"):
            value = float(getattr(self, name))
            if not (0.0 <= value < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {value!r}")
            object.__setattr__(self, name, value)


class Match(NamedTuple):
    det_index: int
    gt_index: int
    distance: float


class TPErrors(NamedTuple):
    m_ate: float
    m_ase: float
    m_aoe: float


@dataclass(frozen=True)
class MetricReport:
    m_ap: float
    m_ate: float
    m_ase: float
    m_aoe: float
    nds_star: float
    per_threshold_ap: dict[float, float]
    match_counts: dict[str, int]

    def __post_init__(self) -> None:
        for name in ("m_ap", "nds_star"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value!r}")
        recomputed = nds_star(self.m_ap, self.m_ate, self.m_ase, self.m_aoe)
        if abs(recomputed - self.nds_star) > 1e-9:
            raise ValueError(
                f"nds_star {self.nds_star!r} inconsistent with its inputs (expected {recomputed!r})"
            )

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "mAP": self.m_ap,
            "mATE": self.m_ate,
            "mASE": self.m_ase,
            "mAOE": self.m_aoe,
            "NDS_star": self.nds_star,
            "per_threshold_ap": {repr(t): ap for t, ap in sorted(self.per_threshold_ap.items())},
            "match_counts": dict(sorted(self.match_counts.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            m_ap=float(data["mAP"]),
            m_ate=float(data["mATE"]),
            m_ase=float(data["mASE"]),
            m_aoe=float(data["mAOE"]),
            nds_star=float(data["NDS_star"]),
            per_threshold_ap={float(t): float(ap) for t, ap in data["per_threshold_ap"].items()},
            match_counts={str(k): int(v) for k, v in data["match_counts"].items()},
        )


def ground_distance(a: Box3D, b: Box3D) -> float:
    """Euclidean distance between box centers on the ground plane."""
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


def aligned_iou(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU after aligning centers and yaw, so only size matters.

    The overlap box has the per-axis minimum extents; degenerate pairs
    with zero union count as perfectly overlapping.
    """
    overlap = math.prod(min(da, db) for da, db in zip(a.dims, b.dims))
    union = a.volume() + b.volume() - overlap
    if union <= 0.0:
        return 1.0
    return overlap / union


def yaw_difference(a: Box3D, b: Box3D) -> float:
    """Smallest absolute yaw difference on the full circle, in [0, pi]."""
    delta = abs(a.yaw - b.yaw)
    return min(delta, 2.0 * math.pi - delta)


def _score_order(dets: Sequence[DetectionRecord]) -> list[int]:
    """Deterministic processing order: score desc, ties by (sample_id, input index)."""
    for index, det in enumerate(dets):
        if det.box.score is None:
            raise ValueError(f"detection {index} has no score")
    return sorted(range(len(dets)), key=lambda i: (-dets[i].box.score, dets[i].sample_id, i))


def _match_sample(
    gts: Sequence[DetectionRecord],
    gt_indices: list[int],
    dets: Sequence[DetectionRecord],
    det_indices: list[int],
    threshold: float,
) -> list[Match]:
    matches: list[Match] = []
    unmatched = list(gt_indices)
    for det_index in det_indices:
        det_box = dets[det_index].box
        best_gt = -1
        best_distance = math.inf
        for gt_index in unmatched:
            distance = ground_distance(det_box, gts[gt_index].box)
            if distance < threshold and distance < best_distance:
                best_distance = distance
                best_gt = gt_index
        if best_gt >= 0:
            unmatched.remove(best_gt)
            matches.append(Match(det_index, best_gt, best_distance))
    return matches


def match_detections(
    gts: Sequence[DetectionRecord],
    dets: Sequence[DetectionRecord],
    threshold: float,
    workers: int = 1,
) -> list[Match]:
    """Greedy score-ordered matching by ground-plane center distance.

    A detection claims the nearest unmatched ground truth of its own
    sample at strictly less than ``threshold`` meters; each ground truth
    is claimed at most once.  Equidistant candidates resolve to the lower
    ground-truth input index.  The result is in detection processing
    order and is independent of the worker count (samples are disjoint).
    """
    order = _score_order(dets)
    dets_by_sample: dict[str, list[int]] = {}
    for det_index in order:
        dets_by_sample.setdefault(dets[det_index].sample_id, []).append(det_index)
    gts_by_sample: dict[str, list[int]] = {}
    for gt_index, gt in enumerate(gts):
        gts_by_sample.setdefault(gt.sample_id, []).append(gt_index)

    sample_ids = sorted(dets_by_sample)
    if workers > 1 and len(sample_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_sample = list(
                pool.map(
                    lambda sid: _match_sample(
                        gts, gts_by_sample.get(sid, []), dets, dets_by_sample[sid], threshold
                    ),
                    sample_ids,
                )
            )
    else:
        per_sample = [
            _match_sample(gts, gts_by_sample.get(sid, []), dets, dets_by_sample[sid], threshold)
            for sid in sample_ids
        ]

    by_det = {match.det_index: match for sample in per_sample for match in sample}
    return [by_det[det_index] for det_index in order if det_index in by_det]


def average_precision(
    gts: Sequence[DetectionRecord],
    dets: Sequence[DetectionRecord],
    threshold: float,
    recall_floor: float = 0.1,
    precision_floor: float = 0.1,
    workers: int = 1,
) -> float:
    """AP on the 101-point recall grid above the recall/precision floors.

    Precision at each grid recall is interpolated as the maximum precision
    at any recall to the right.  The grid bin at exactly the recall floor
    is excluded, and the clipped precision mass is rescaled by
    1 / (1 - precision_floor) so a perfect detector scores 1.

    Raises UndefinedAPError when there are no ground truths.
    """
    if not gts:
        raise UndefinedAPError(f"no ground truths at threshold {threshold}")
    order = _score_order(dets)
    grid = np.linspace(0.0, 1.0, 101)
    start = int(round(100 * recall_floor)) + 1
    if not dets:
        return 0.0

    matched = {match.det_index for match in match_detections(gts, dets, threshold, workers=workers)}
    tp_flags = np.array([1.0 if det_index in matched else 0.0 for det_index in order])
    tp_cum = np.cumsum(tp_flags)
    fp_cum = np.cumsum(1.0 - tp_flags)
    recall = tp_cum / len(gts)
    precision = tp_cum / (tp_cum + fp_cum)

    # best precision at recall >= r, per grid point
    right_max = np.maximum.accumulate(precision[::-1])[::-1]
    insert = np.searchsorted(recall, grid, side="left")
    grid_precision = np.where(insert < len(recall), right_max[np.minimum(insert, len(recall) - 1)], 0.0)

    clipped = np.clip(grid_precision[start:] - precision_floor, 0.0, None)
    ap = float(np.mean(clipped)) / (1.0 - precision_floor)
    return min(1.0, max(0.0, ap))


def tp_errors(matched_boxes: Sequence[tuple[Box3D, Box3D]]) -> TPErrors:
    """Mean translation / scale / orientation errors over matched (gt, det) pairs.

    Translation is ground-plane center distance (meters), scale is
    1 - aligned_iou, orientation is the wrapped absolute yaw difference
    (radians).  With no matches each error defaults to 1.
    """
    if not matched_boxes:
        return TPErrors(1.0, 1.0, 1.0)
    translation = [ground_distance(gt, det) for gt, det in matched_boxes]
    scale = [1.0 - aligned_iou(gt, det) for gt, det in matched_boxes]
    orientation = [yaw_difference(gt, det) for gt, det in matched_boxes]
    n = len(matched_boxes)
    return TPErrors(sum(translation) / n, sum(scale) / n, sum(orientation) / n)


def nds_star(m_ap: float, m_ate: float, m_ase: float, m_aoe: float) -> float:
    """Aggregate score from mAP and the three TP errors, each clamped at 1."""
    if not (0.0 <= m_ap <= 1.0):
        raise ValueError(f"mAP must be in [0, 1], got {m_ap!r}")
    for name, value in (("mATE", m_ate), ("mASE", m_ase), ("mAOE", m_aoe)):
        if value < 0.0 or not math.isfinite(value):
            raise ValueError(f"{name} must be a finite non-negative error, got {value!r}")
    recovered = (1.0 - min(1.0, m_ate)) + (1.0 - min(1.0, m_ase)) + (1.0 - min(1.0, m_aoe))
    return (3.0 * m_ap + recovered) / 6.0


def _within_range(record: DetectionRecord, range_limit: float) -> bool:
    return math.hypot(record.box.center[0], record.box.center[1]) <= range_limit


def evaluate(
    gts: Sequence[DetectionRecord],
    dets: Sequence[DetectionRecord],
    cfg: MetricConfig | None = None,
    workers: int = 1,
) -> MetricReport:
    """Full single-class report: range filter, per-threshold AP, TP errors, NDS*.

    Both sets are filtered to ``cfg.range_limit`` on ground-plane center
    norm before anything else.  Raises UndefinedAPError when no ground
    truths survive the filter.
    """
    cfg = cfg or MetricConfig()
    gts_kept = [gt for gt in gts if _within_range(gt, cfg.range_limit)]
    dets_kept = [det for det in dets if _within_range(det, cfg.range_limit)]

    per_threshold_ap = {
        threshold: average_precision(
            gts_kept,
            dets_kept,
            threshold,
            recall_floor=cfg.recall_floor,
            precision_floor=cfg.precision_floor,
            workers=workers,
        )
        for threshold in cfg.distance_thresholds
    }
    m_ap = sum(per_threshold_ap.values()) / len(per_threshold_ap)

    tp_matches = match_detections(gts_kept, dets_kept, cfg.tp_threshold, workers=workers)
    pairs = [(gts_kept[m.gt_index].box, dets_kept[m.det_index].box) for m in tp_matches]
    errors = tp_errors(pairs)

    match_counts = {
        "ground_truths": len(gts_kept),
        "detections": len(dets_kept),
    }
    for threshold in cfg.distance_thresholds:
        count = len(match_detections(gts_kept, dets_kept, threshold, workers=workers))
        match_counts[f"matches@{threshold:g}"] = count

    return MetricReport(
        m_ap=m_ap,
        m_ate=errors.m_ate,
        m_ase=errors.m_ase,
        m_aoe=errors.m_aoe,
        nds_star=nds_star(m_ap, errors.m_ate, errors.m_ase, errors.m_aoe),
        per_threshold_ap=per_threshold_ap,
        match_counts=match_counts,
    )
