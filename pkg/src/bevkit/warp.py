"""Projective image warping by inverse mapping with bilinear sampling."""

from __future__ import annotations

import numpy as np

__all__ = ["warp_image"]


def _as_matrix(homography) -> np.ndarray:
    matrix = getattr(homography, "matrix", homography)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3):
        raise ValueError(f"expected a 3x3 homography, got shape {matrix.shape}")
    return matrix


def warp_image(image: np.ndarray, homography, out_size: tuple[int, int]) -> np.ndarray:
    """Apply a homography to a raster, output pixel q' sampled at H^-1 q'.

    ``image`` is (h, w) or (h, w, channels); ``out_size`` is (width,
    height).  Samples falling outside the source are filled with 0.
    Accepts a Homography value or a raw 3x3 array; raises ValueError if
    the matrix is singular.
    """
    matrix = _as_matrix(homography)
    det = np.linalg.det(matrix)
    if not np.isfinite(det) or abs(det) < 1e-15:
        raise ValueError(f"homography is singular (det {det:.3e}); cannot invert for warping")
    inverse = np.linalg.inv(matrix)
    # Rescaling by the last element keeps the identity map exact after the
    # unit-norm gauge (x / x == 1) and does not change the projective map.
    if abs(inverse[2, 2]) > 1e-12:
        inverse = inverse / inverse[2, 2]

    if image.ndim not in (2, 3):
        raise ValueError(f"expected a (h, w) or (h, w, c) raster, got shape {image.shape}")
    out_width, out_height = int(out_size[0]), int(out_size[1])
    if out_width <= 0 or out_height <= 0:
        raise ValueError(f"out_size must be positive, got {out_size!r}")
    src_height, src_width = image.shape[:2]

    u, v = np.meshgrid(np.arange(out_width, dtype=float), np.arange(out_height, dtype=float))
    denom = inverse[2, 0] * u + inverse[2, 1] * v + inverse[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (inverse[0, 0] * u + inverse[0, 1] * v + inverse[0, 2]) / denom
        y = (inverse[1, 0] * u + inverse[1, 1] * v + inverse[1, 2]) / denom

    valid = (
        np.isfinite(x)
        & np.isfinite(y)
        & (np.abs(denom) > 1e-15)
        & (x >= 0.0)
        & (x <= src_width - 1.0)
        & (y >= 0.0)
        & (y <= src_height - 1.0)
    )
    x = np.where(valid, x, 0.0)
    y = np.where(valid, y, 0.0)

    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, src_width - 1)
    y1 = np.minimum(y0 + 1, src_height - 1)

    source = image.astype(float)
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
        valid_mask = valid[..., None]
    else:
        valid_mask = valid

    value = (
        (1.0 - fx) * (1.0 - fy) * source[y0, x0]
        + fx * (1.0 - fy) * source[y0, x1]
        + (1.0 - fx) * fy * source[y1, x0]
        + fx * fy * source[y1, x1]
    )
    value = np.where(valid_mask, value, 0.0)

    if np.issubdtype(image.dtype, np.integer):
        info = np.iinfo(image.dtype)
        return np.clip(np.rint(value), info.min, info.max).astype(image.dtype)
    return value.astype(image.dtype)
