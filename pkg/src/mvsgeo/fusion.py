"""Depth-map fusion into a single point cloud.

Every view takes a turn as the reference.  A reference pixel fuses when
its confidence clears the probability threshold and its depth passes the
cross-view reprojection check in enough source views; the fused 3D point
is the back-projection of the depth averaged over the reference and the
consistent sources.  Source pixels hit by an emitted point are marked
consumed so each surface point is emitted once.  Emission order is the
row-major reference-view scan, so output is deterministic and identical
for any thread count (threads only parallelize the per-pair reprojection
arrays; the consume pass is sequential).

Two checking modes: "fusibile" applies one displacement/relative-depth
threshold pair and a fixed required view count; "dynamic" derives the
threshold pair from the required count through a monotone table (looser
displacement when more views must agree), accepting a pixel when any
count from the required minimum upward is satisfied by its own row.  The
table is configuration, not canon; the default grows 0.25 px and 0.0025
relative depth per required view.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import Camera, pixel_grid
from .reproject import DepthMap, fbr, forward_project

__all__ = ["FusionParams", "PointCloud", "DEFAULT_DYNAMIC_TABLE", "dynamic_thresholds", "fuse"]

DEFAULT_DYNAMIC_TABLE = tuple((0.25 * k, 0.0025 * k) for k in range(1, 9))

_MODES = ("fusibile", "dynamic")
_AVERAGES = ("mean", "median")


@dataclass(frozen=True)
class FusionParams:
    mode: str = "fusibile"
    disparity_threshold: float = 1.0
    depth_threshold: float = 0.01
    prob_threshold: float = 0.5
    consistency_threshold: int = 3
    average: str = "mean"
    dynamic_table: tuple = DEFAULT_DYNAMIC_TABLE

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.average not in _AVERAGES:
            raise ValueError(f"average must be one of {_AVERAGES}")
        if not 0.0 <= self.prob_threshold <= 1.0:
            raise ValueError("prob_threshold must lie in [0, 1]")
        if self.consistency_threshold < 1:
            raise ValueError("consistency_threshold must be >= 1")
        if self.disparity_threshold <= 0 or self.depth_threshold <= 0:
            raise ValueError("geometric thresholds must be positive")
        table = tuple((float(a), float(b)) for a, b in self.dynamic_table)
        if not table:
            raise ValueError("dynamic table must not be empty")
        object.__setattr__(self, "dynamic_table", table)


@dataclass
class PointCloud:
    """Fused 3D points with optional per-point color and confidence."""

    points: np.ndarray
    colors: np.ndarray | None = None
    confidence: np.ndarray | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(points).all():
            raise ValueError("point coordinates must be finite")
        self.points = points
        if self.colors is not None:
            colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if colors.shape[0] != points.shape[0]:
                raise ValueError("colors length mismatch")
            self.colors = colors
        if self.confidence is not None:
            conf = np.asarray(self.confidence, dtype=np.float64).reshape(-1)
            if conf.shape[0] != points.shape[0]:
                raise ValueError("confidence length mismatch")
            self.confidence = conf

    def __len__(self) -> int:
        return self.points.shape[0]


def dynamic_thresholds(num_required: int, table=DEFAULT_DYNAMIC_TABLE) -> tuple[float, float]:
    """(displacement px, relative depth) pair used when num_required views must agree.

    Entries beyond the table clamp to its last row.
    """
    if num_required < 1:
        raise ValueError("num_required must be >= 1")
    return tuple(table[min(num_required, len(table)) - 1])


def _unpack_view(view):
    if len(view) == 3:
        depth, conf, cam = view
        image = None
    elif len(view) == 4:
        depth, conf, cam, image = view
    else:
        raise ValueError("each view is (depth, confidence, camera[, image])")
    conf = np.asarray(conf, dtype=np.float64)
    if conf.shape != depth.shape:
        raise ValueError("confidence map shape does not match depth map")
    return depth, conf, cam, image


def _pair_arrays(d_ref: DepthMap, ref_cam: Camera, d_src: DepthMap, src_cam: Camera):
    """Reprojection check arrays for one (reference, source) pair."""
    h, w = d_ref.shape
    xs, ys = pixel_grid(h, w)
    coords, _ = forward_project(d_ref, ref_cam, src_cam)
    d_reproj, p_reproj = fbr(d_ref, ref_cam, d_src, src_cam)
    ok = d_reproj.valid
    disp = np.where(ok, np.hypot(p_reproj.x - xs, p_reproj.y - ys), np.inf)
    denom = np.where(d_ref.valid, d_ref.values, 1.0)
    rdd = np.where(ok, np.abs(d_reproj.values - d_ref.values) / denom, np.inf)
    sx = np.where(coords.valid, np.rint(coords.x), -1.0).astype(np.int64)
    sy = np.where(coords.valid, np.rint(coords.y), -1.0).astype(np.int64)
    hs, ws = d_src.shape
    in_src = (sx >= 0) & (sx <= ws - 1) & (sy >= 0) & (sy <= hs - 1)
    sx = np.where(in_src, sx, -1)
    sy = np.where(in_src, sy, -1)
    return disp, rdd, d_reproj.values, sx, sy


def _back_project_grid(depth_values, mask, cam: Camera):
    """World points for the masked pixels of a depth grid, row-major order."""
    h, w = depth_values.shape
    xs, ys = pixel_grid(h, w)
    d = depth_values[mask]
    x = xs[mask]
    y = ys[mask]
    rays = np.linalg.inv(cam.K) @ np.stack([x * d, y * d, d])
    world = cam.E[:3, :3].T @ (rays - cam.E[:3, 3:4])
    return world.T


def fuse(views, params: FusionParams = FusionParams(), pairs=None, threads: int = 1) -> PointCloud:
    """Fuse per-view depth and confidence maps into one point cloud.

    views: list of (DepthMap, confidence, Camera[, image]) tuples; image
    is an optional (H, W, 3) uint8 array supplying point colors.
    pairs: per reference view, the list of source view indices checked
    against it (defaults to all other views).
    """
    if len(views) < 2:
        raise ValueError("fusion needs at least two views")
    unpacked = [_unpack_view(v) for v in views]
    shape = unpacked[0][0].shape
    for depth, conf, cam, image in unpacked:
        if depth.shape != shape:
            raise ValueError("all views must share the image dimensions")
    n_views = len(unpacked)
    if pairs is None:
        pairs = [[s for s in range(n_views) if s != r] for r in range(n_views)]
    if len(pairs) != n_views:
        raise ValueError("pairs must list sources for every view")
    for r, srcs in enumerate(pairs):
        if r in srcs:
            raise ValueError("a view cannot be its own source")

    def build(r):
        depth_r, _, cam_r, _ = unpacked[r]
        rows = [_pair_arrays(depth_r, cam_r, unpacked[s][0], unpacked[s][2]) for s in pairs[r]]
        if not rows:
            raise ValueError(f"view {r} has no source views")
        return tuple(np.stack([row[k] for row in rows]) for k in range(5))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pair_data = list(pool.map(build, range(n_views)))
    else:
        pair_data = [build(r) for r in range(n_views)]

    if params.mode == "fusibile":
        mode_flag = 0
        table = np.array([[params.disparity_threshold, params.depth_threshold]])
    else:
        mode_flag = 1
        table = np.array(params.dynamic_table, dtype=np.float64)

    h, w = shape
    consumed = np.zeros((n_views, h, w), dtype=np.uint8)
    all_points, all_colors, all_conf = [], [], []
    any_image = any(img is not None for *_, img in unpacked)
    avg_flag = 0 if params.average == "mean" else 1
    for r in range(n_views):
        depth_r, conf_r, cam_r, image_r = unpacked[r]
        disp, rdd, dres, sx, sy = pair_data[r]
        fused_depth, fused_mask = _kernels.fuse_reference_pass(
            depth_r.values,
            depth_r.valid.astype(np.uint8),
            conf_r,
            disp,
            rdd,
            dres,
            sx,
            sy,
            consumed,
            r,
            np.asarray(pairs[r], dtype=np.int64),
            float(params.prob_threshold),
            int(params.consistency_threshold),
            mode_flag,
            table,
            avg_flag,
        )
        mask = fused_mask.astype(bool)
        if not mask.any():
            continue
        all_points.append(_back_project_grid(fused_depth, mask, cam_r))
        all_conf.append(conf_r[mask])
        if any_image:
            if image_r is not None:
                all_colors.append(np.asarray(image_r, dtype=np.uint8)[mask])
            else:
                all_colors.append(np.zeros((int(mask.sum()), 3), dtype=np.uint8))

    if not all_points:
        return PointCloud(points=np.zeros((0, 3)))
    points = np.concatenate(all_points)
    colors = np.concatenate(all_colors) if any_image else None
    confidence = np.concatenate(all_conf)
    return PointCloud(points=points, colors=colors, confidence=confidence)
