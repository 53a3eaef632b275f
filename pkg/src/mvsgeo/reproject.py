"""Forward-backward reprojection of depth maps between calibrated views.

The chain implemented here: warp each valid reference pixel into a source
view, sample the source depth map at the landing coordinates, then carry
that sampled depth back through the source camera and reproject it into
the reference view.  Comparing the result against the original reference
depth is the basis of every consistency check in this package.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .camera import Camera, W_EPS, pixel_grid, warp_transform

__all__ = ["DepthMap", "CoordinateGrid", "forward_project", "remap", "fbr"]


@dataclass
class DepthMap:
    """H x W depth grid (scene units) with a validity mask.

    Invalid pixels hold 0 and are ignored by all consumers.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2:
            raise ValueError(f"depth values must be 2-D, got shape {values.shape}")
        if valid.shape != values.shape:
            raise ValueError(
                f"dimension mismatch between depth map {values.shape} and mask {valid.shape}"
            )
        if not np.all(values[valid] > 0):
            raise ValueError("valid depth values must be > 0")
        self.values = np.where(valid, values, 0.0)
        self.valid = valid

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DepthMap":
        """Build a map whose validity is simply depth > 0."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, values > 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class CoordinateGrid:
    """Continuous per-pixel (x, y) coordinates, e.g. projection landing points."""

    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 2:
            raise ValueError("coordinate grids must be 2-D and same shape")
        valid = self.valid
        if valid is None:
            valid = np.ones(x.shape, dtype=bool)
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != x.shape:
            raise ValueError("coordinate validity mask shape mismatch")
        self.x = np.where(valid, x, 0.0)
        self.y = np.where(valid, y, 0.0)
        self.valid = valid

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    @classmethod
    def identity(cls, height: int, width: int) -> "CoordinateGrid":
        xs, ys = pixel_grid(height, width)
        return cls(xs, ys)


def _apply_warp(transform: np.ndarray, xs, ys, depth, valid):
    """Apply a pixel-depth warp to (x, y, d) grids.

    Returns the warped (x', y', d') and a validity mask; pixels landing
    behind the camera (d' below W_EPS) are invalidated.
    """
    u = transform[0, 0] * xs * depth + transform[0, 1] * ys * depth + transform[0, 2] * depth + transform[0, 3]
    v = transform[1, 0] * xs * depth + transform[1, 1] * ys * depth + transform[1, 2] * depth + transform[1, 3]
    d = transform[2, 0] * xs * depth + transform[2, 1] * ys * depth + transform[2, 2] * depth + transform[2, 3]
    q = transform[3, 0] * xs * depth + transform[3, 1] * ys * depth + transform[3, 2] * depth + transform[3, 3]
    ok = valid & (np.abs(q) > W_EPS)
    qs = np.where(ok, q, 1.0)
    d = d / qs
    ok = ok & (d > W_EPS)
    ds = np.where(ok, d, 1.0)
    x2 = np.where(ok, u / qs / ds, 0.0)
    y2 = np.where(ok, v / qs / ds, 0.0)
    d2 = np.where(ok, d, 0.0)
    return x2, y2, d2, ok


def forward_project(d_ref: DepthMap, ref: Camera, src: Camera) -> tuple[CoordinateGrid, DepthMap]:
    """Warp a reference depth map into a source view.

    Returns the per-pixel landing coordinates in the source image and the
    depth of each warped point in the source camera frame.  Pixels that
    are invalid in the input or land behind the source camera come back
    invalid.
    """
    h, w = d_ref.shape
    xs, ys = pixel_grid(h, w)
    transform = warp_transform(ref, src)
    x2, y2, d2, ok = _apply_warp(transform, xs, ys, d_ref.values, d_ref.valid)
    return CoordinateGrid(x2, y2, ok), DepthMap(d2, ok)


def remap(src_map: DepthMap, coords: CoordinateGrid) -> DepthMap:
    """Bilinearly sample a source depth map at continuous coordinates.

    A sample is invalid when its coordinates are invalid, fall outside
    [0, W-1] x [0, H-1], or any of the four bilinear neighbors is invalid
    in the source map.  Out-of-bounds samples are dropped, not clamped:
    clamping would fabricate depths at image borders.
    """
    out, ok = _kernels.bilinear_remap(
        src_map.values,
        src_map.valid.astype(np.uint8),
        coords.x,
        coords.y,
        coords.valid.astype(np.uint8),
    )
    return DepthMap(out, ok.astype(bool))


def fbr(d_ref: DepthMap, ref: Camera, d_src_gt: DepthMap, src: Camera) -> tuple[DepthMap, CoordinateGrid]:
    """Forward-backward reprojection of a reference depth map via one source view.

    Three steps: forward-warp the reference depths into the source view,
    sample the source depth map at the landing coordinates, then
    back-project the sampled depths through the source camera and
    reproject into the reference view.  Returns the reprojected depth map
    (values in the reference camera frame) and the reprojected pixel
    coordinates.  Invalidity propagates through every step.
    """
    coords, _ = forward_project(d_ref, ref, src)
    d_remap = remap(d_src_gt, coords)
    back = warp_transform(src, ref)
    x2, y2, d2, ok = _apply_warp(back, coords.x, coords.y, d_remap.values, d_remap.valid)
    return DepthMap(d2, ok), CoordinateGrid(x2, y2, ok)
