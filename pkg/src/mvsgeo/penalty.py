"""Multi-view geometric consistency penalty.

For every source view the reference depth map is reprojected forward and
back; a pixel is inconsistent in that view when its reprojection
displacement exceeds the pixel threshold or its relative depth difference
exceeds the depth threshold (strict comparisons), or when the
reprojection is impossible (occluded, out of view, behind a camera).
Inconsistency votes are summed over the M source views and mapped to the
per-pixel penalty: 1 + mask_sum/M in the [1,2] range mode, or
1 + 2*mask_sum/M in the [1,3] mode.
"""

from dataclasses import dataclass

import numpy as np

from .camera import Camera, pixel_grid
from .reproject import CoordinateGrid, DepthMap, fbr

__all__ = [
    "GcThresholds",
    "PenaltyMap",
    "STAGE_PIXEL_THRESHOLDS",
    "STAGE_DEPTH_THRESHOLDS",
    "inconsistency_mask",
    "per_pixel_penalty",
    "apply_reference_mask",
    "penalty_histogram",
]

# Stage-wise defaults, coarse to refine.
STAGE_PIXEL_THRESHOLDS = (1.0, 0.5, 0.25)
STAGE_DEPTH_THRESHOLDS = (0.01, 0.005, 0.0025)

_RANGE_MODES = ("one-two", "one-three")


@dataclass(frozen=True)
class GcThresholds:
    """Per-stage thresholds: d_pixel in pixels, d_depth dimensionless."""

    d_pixel: float
    d_depth: float

    def __post_init__(self):
        if not (self.d_pixel > 0 and self.d_depth > 0):
            raise ValueError("thresholds must be strictly positive")


@dataclass
class PenaltyMap:
    """Per-pixel inconsistency penalty with its range mode and view count."""

    values: np.ndarray
    range_mode: str
    m: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.range_mode not in _RANGE_MODES:
            raise ValueError(f"range_mode must be one of {_RANGE_MODES}")


def inconsistency_mask(
    d_ref: DepthMap,
    d_reproj: DepthMap,
    p_reproj: CoordinateGrid,
    thresholds: GcThresholds,
) -> np.ndarray:
    """Single-view inconsistency vote for every valid reference pixel.

    Reprojection-invalid pixels vote inconsistent; reference-invalid
    pixels never vote.
    """
    if d_reproj.shape != d_ref.shape or p_reproj.shape != d_ref.shape:
        raise ValueError("reprojection outputs must match the reference shape")
    tested = d_ref.valid
    if np.any(d_ref.values[tested] == 0):
        raise ValueError("zero reference depth")
    h, w = d_ref.shape
    xs, ys = pixel_grid(h, w)
    pde = np.sqrt((p_reproj.x - xs) ** 2 + (p_reproj.y - ys) ** 2)
    denom = np.where(tested, d_ref.values, 1.0)
    rdd = np.abs(d_reproj.values - d_ref.values) / denom
    ok = d_reproj.valid & p_reproj.valid
    flagged = ~ok | (pde > thresholds.d_pixel) | (rdd > thresholds.d_depth)
    return tested & flagged


def per_pixel_penalty(
    d_ref: DepthMap,
    ref: Camera,
    sources: list[tuple[DepthMap, Camera]],
    thresholds: GcThresholds,
    range_mode: str = "one-two",
) -> PenaltyMap:
    """Accumulate inconsistency votes over all source views into the penalty map."""
    if not sources:
        raise ValueError("at least one source view is required")
    if range_mode not in _RANGE_MODES:
        raise ValueError(f"range_mode must be one of {_RANGE_MODES}")
    mask_sum = np.zeros(d_ref.shape, dtype=np.int64)
    for d_src, src_cam in sources:
        if d_src.shape != d_ref.shape:
            raise ValueError(
                f"source depth shape {d_src.shape} does not match reference {d_ref.shape}"
            )
        d_reproj, p_reproj = fbr(d_ref, ref, d_src, src_cam)
        mask_sum += inconsistency_mask(d_ref, d_reproj, p_reproj, thresholds)
    m = len(sources)
    if range_mode == "one-two":
        values = 1.0 + mask_sum / m
    else:
        values = 1.0 + 2.0 * mask_sum / m
    return PenaltyMap(values, range_mode, m)


def apply_reference_mask(penalty: PenaltyMap, ref_mask: np.ndarray) -> PenaltyMap:
    """Zero the penalty outside the reference view mask, keep it unchanged inside."""
    ref_mask = np.asarray(ref_mask)
    if ref_mask.shape != penalty.values.shape:
        raise ValueError("reference mask shape mismatch")
    values = penalty.values * (ref_mask != 0)
    return PenaltyMap(values, penalty.range_mode, penalty.m)


def penalty_histogram(penalty: PenaltyMap) -> dict:
    """Per-level pixel counts and the mean penalty over masked-in pixels."""
    inside = penalty.values > 0
    levels, counts = np.unique(penalty.values[inside], return_counts=True)
    hist = [{"level": float(lv), "count": int(ct)} for lv, ct in zip(levels, counts)]
    mean = float(penalty.values[inside].mean()) if inside.any() else 0.0
    return {
        "range_mode": penalty.range_mode,
        "num_sources": penalty.m,
        "pixels_in_mask": int(inside.sum()),
        "mean_penalty": mean,
        "histogram": hist,
    }
