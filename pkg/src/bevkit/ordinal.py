"""Focal-length pseudo-domains with an ordinal classification loss.

Focal lengths are binned by uniform discretization of an interval
[alpha, beta] into K sub-intervals.  The K + 1 bin edges plus the two
open ranges on either side give K + 2 ordered categories.  Classifying a
focal length into its category is decomposed into K + 1 binary questions
"is the focal length below edge k?", one per edge, which preserves the
ordering information a plain cross-entropy would ignore.

Logits come in pairs: entry 2k scores "below edge k", entry 2k + 1 scores
"not below", so a scheme with K sub-intervals needs 2 (K + 1) logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OrdinalDomainScheme",
    "DATASET_SCHEMES",
    "make_scheme",
    "assign_label",
    "ordinal_loss",
    "ordinal_loss_grad",
    "decode_label",
    "reverse_gradient",
]


@dataclass(frozen=True)
class OrdinalDomainScheme:
    """Uniform discretization of a focal-length interval.

    ``thresholds`` holds the K + 1 bin edges alpha + (beta - alpha) * i / K.
    Category 0 is "below alpha", category K + 1 is "at or above beta", and
    categories 1..K are the half-open sub-intervals [t_{i-1}, t_i).
    """

    alpha: float
    beta: float
    num_subintervals: int
    thresholds: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)) or self.alpha >= self.beta:
            raise ValueError(f"need alpha < beta, got alpha={self.alpha}, beta={self.beta}")
        if self.num_subintervals < 1:
            raise ValueError(f"need at least 1 sub-interval, got {self.num_subintervals}")
        if len(self.thresholds) != self.num_subintervals + 1:
            raise ValueError(
                f"expected {self.num_subintervals + 1} thresholds, got {len(self.thresholds)}"
            )
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly ascending")

    @property
    def num_categories(self) -> int:
        return self.num_subintervals + 2

    @property
    def num_logits(self) -> int:
        return 2 * (self.num_subintervals + 1)


def make_scheme(alpha: float, beta: float, num_subintervals: int) -> OrdinalDomainScheme:
    """Build the scheme with edges alpha + (beta - alpha) * i / K, i = 0..K."""
    alpha, beta = float(alpha), float(beta)
    k = int(num_subintervals)
    if alpha >= beta:
        raise ValueError(f"need alpha < beta, got alpha={alpha}, beta={beta}")
    if k < 1:
        raise ValueError(f"need at least 1 sub-interval, got {num_subintervals}")
    thresholds = tuple(alpha + (beta - alpha) * i / k for i in range(k + 1))
    return OrdinalDomainScheme(alpha, beta, k, thresholds)


# Focal-length discretizations (pixels) used with the public datasets.
DATASET_SCHEMES: dict[str, OrdinalDomainScheme] = {
    "nuscenes": make_scheme(500.0, 750.0, 5),
    "waymo": make_scheme(600.0, 900.0, 6),
    "lyft": make_scheme(500.0, 650.0, 3),
}


def assign_label(scheme: OrdinalDomainScheme, focal: float) -> int:
    """Category of a focal length; edges belong to the upper bin.

    Returns 0 below the first edge, K + 1 at or above the last, and i + 1
    for focal in [t_i, t_{i+1}).
    """
    focal = float(focal)
    thresholds = scheme.thresholds
    if focal < thresholds[0]:
        return 0
    if focal >= thresholds[-1]:
        return scheme.num_subintervals + 1
    # np.searchsorted(side="right") gives the count of edges <= focal.
    return int(np.searchsorted(np.asarray(thresholds), focal, side="right"))


def _split_logits(logits, label: int) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(logits, dtype=float).reshape(-1)
    if values.size < 4 or values.size % 2 != 0:
        raise ValueError(f"logits length must be even and >= 4, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("logits must be finite")
    num_edges = values.size // 2
    label = int(label)
    if not (0 <= label <= num_edges):
        raise ValueError(f"label must be in [0, {num_edges}], got {label}")
    # margins[k] > 0 favors "below edge k"
    margins = values[0::2] - values[1::2]
    below = (label <= np.arange(num_edges)).astype(float)
    return margins, below


def ordinal_loss(logits, label: int) -> float:
    """Sum of the K + 1 binary cross-entropies; non-negative, 0 at saturation.

    Each edge k contributes -log P_k when the label says the focal length
    is below edge k (label <= k) and -log (1 - P_k) otherwise, where
    P_k = sigmoid(logit_{2k} - logit_{2k+1}).  Computed through a stable
    softplus so saturated logits cannot overflow.
    """
    margins, below = _split_logits(logits, label)
    # -log sigmoid(m) = softplus(-m); -log(1 - sigmoid(m)) = softplus(m)
    terms = below * np.logaddexp(0.0, -margins) + (1.0 - below) * np.logaddexp(0.0, margins)
    return float(np.sum(terms))


def ordinal_loss_grad(logits, label: int) -> np.ndarray:
    """Analytic gradient of ordinal_loss with respect to the logits."""
    margins, below = _split_logits(logits, label)
    # sigmoid via exp(log sigmoid) stays finite at both tails
    prob_below = np.exp(-np.logaddexp(0.0, -margins))
    d_margin = prob_below - below
    grad = np.empty(margins.size * 2)
    grad[0::2] = d_margin
    grad[1::2] = -d_margin
    return grad


def decode_label(logits) -> int:
    """Rank decoding: count of edges the logits place below the focal length.

    On logits saturated consistently with a label l this recovers l (the
    first l edge classifiers say "not below").
    """
    values = np.asarray(logits, dtype=float).reshape(-1)
    if values.size < 4 or values.size % 2 != 0:
        raise ValueError(f"logits length must be even and >= 4, got {values.size}")
    margins = values[0::2] - values[1::2]
    return int(np.sum(margins < 0.0))


def reverse_gradient(grad, grl_lambda: float = 1.0) -> np.ndarray:
    """Scaled gradient negation, -lambda * grad (forward pass is the identity)."""
    grl_lambda = float(grl_lambda)
    if not math.isfinite(grl_lambda) or grl_lambda < 0.0:
        raise ValueError(f"lambda must be >= 0, got {grl_lambda!r}")
    return -grl_lambda * np.asarray(grad, dtype=float)
