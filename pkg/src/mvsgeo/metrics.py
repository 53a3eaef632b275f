"""Point-cloud and depth-map quality metrics.

Accuracy is the mean nearest-neighbor distance from the predicted cloud
to the ground truth, completeness the same with the roles swapped, both
restricted to distances at or below the max threshold (points beyond it
are excluded from the mean, not clamped).  Overall is their average.
Depth metrics are the mean absolute error plus the fractions of pixels
whose error exceeds 1 and 3 scene units.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .reproject import DepthMap

__all__ = [
    "PointCloudMetrics",
    "DepthMetrics",
    "nearest_neighbor_distances",
    "accuracy",
    "completeness",
    "overall",
    "evaluate_point_clouds",
    "depth_metrics",
]


@dataclass(frozen=True)
class PointCloudMetrics:
    accuracy: float
    completeness: float
    overall: float
    max_dist: float


@dataclass(frozen=True)
class DepthMetrics:
    epe: float
    e1: float
    e3: float


def _points(cloud) -> np.ndarray:
    pts = getattr(cloud, "points", cloud)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) point array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("point cloud is empty")
    return pts


def nearest_neighbor_distances(queries, refs, method: str = "kdtree") -> np.ndarray:
    """Distance from every query point to its nearest reference point.

    The k-d tree path is exact; the brute-force path is the quadratic
    scan kept as its independent cross-check.
    """
    queries = _points(queries)
    refs = _points(refs)
    if method == "kdtree":
        dists, _ = cKDTree(refs).query(queries, k=1)
        return np.asarray(dists, dtype=np.float64)
    if method == "bruteforce":
        return _kernels.nn_bruteforce(np.ascontiguousarray(queries), np.ascontiguousarray(refs))
    raise ValueError(f"unknown method {method!r}")


def accuracy(pred, gt, max_dist: float, method: str = "kdtree") -> float:
    """Mean nearest-neighbor distance predicted -> ground truth, cut at max_dist."""
    dists = nearest_neighbor_distances(pred, gt, method)
    measured = dists <= max_dist
    if not measured.any():
        raise ValueError("no measurable points")
    return float(dists[measured].mean())


def completeness(pred, gt, max_dist: float, method: str = "kdtree") -> float:
    """Mean nearest-neighbor distance ground truth -> predicted, cut at max_dist."""
    return accuracy(gt, pred, max_dist, method)


def overall(acc: float, comp: float) -> float:
    return (acc + comp) / 2.0


def evaluate_point_clouds(pred, gt, max_dist: float) -> PointCloudMetrics:
    acc = accuracy(pred, gt, max_dist)
    comp = completeness(pred, gt, max_dist)
    return PointCloudMetrics(acc, comp, overall(acc, comp), max_dist)


def depth_metrics(pred, gt, valid) -> DepthMetrics:
    """EPE / e1 / e3 over the valid pixels of a depth map pair."""
    pred_v = pred.values if isinstance(pred, DepthMap) else np.asarray(pred, dtype=np.float64)
    gt_v = gt.values if isinstance(gt, DepthMap) else np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pred_v.shape != gt_v.shape or valid.shape != gt_v.shape:
        raise ValueError("depth maps and mask must share a shape")
    if not valid.any():
        raise ValueError("no valid pixels to evaluate")
    err = np.abs(pred_v[valid] - gt_v[valid])
    return DepthMetrics(
        epe=float(err.mean()),
        e1=float((err > 1.0).mean()),
        e3=float((err > 3.0).mean()),
    )
