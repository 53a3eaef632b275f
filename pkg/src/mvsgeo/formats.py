"""Readers and writers for the ecosystem file formats.

All functions operate on byte buffers or strings; opening and closing
files is the caller's concern.  Readers reject malformed input with a
ParseError carrying the offending line or byte offset; they never
silently truncate.

Formats:

* PFM: "Pf"/"PF" magic line, "width height" line, scale line whose sign
  encodes endianness (negative = little endian), then raw 32-bit floats
  stored bottom row first.  The writer always emits little endian.
* cam.txt: "extrinsic" keyword + 4x4 world-to-camera matrix, "intrinsic"
  keyword + 3x3 matrix, then a "depth_min depth_interval" line.
* PLY point clouds: ascii or binary_little_endian, float x/y/z and
  optional uchar red/green/blue.
* Probability volume: "PROBVOL" magic line, "D H W" line, a
  "shared"/"perpixel" hypothesis layout line, then raw little-endian
  float32 hypotheses followed by the D*H*W probabilities.
"""

import re
import warnings

import numpy as np

from .camera import Camera
from .fusion import PointCloud
from .loss import ProbabilityVolume

__all__ = [
    "ParseError",
    "PfmImage",
    "read_pfm",
    "write_pfm",
    "depth_from_pfm",
    "depth_to_pfm",
    "read_cam",
    "write_cam",
    "read_ply",
    "write_ply",
    "read_probability_volume",
    "write_probability_volume",
]


class ParseError(ValueError):
    """Malformed input; message names the byte offset or line number."""

    def __init__(self, message, line=None, offset=None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte offset {offset})"
        super().__init__(message + where)
        self.line = line
        self.offset = offset


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------


class PfmImage:
    """Decoded PFM: data is (H, W) or (H, W, 3) float32, top row first."""

    def __init__(self, data: np.ndarray, scale: float = -1.0):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim == 2:
            channels = 1
        elif data.ndim == 3 and data.shape[2] == 3:
            channels = 3
        else:
            raise ValueError(f"PFM data must be (H, W) or (H, W, 3), got {data.shape}")
        if scale == 0:
            raise ValueError("PFM scale must be non-zero")
        self.data = data
        self.scale = float(scale)
        self.channels = channels

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _pfm_line(data: bytes, pos: int):
    end = data.find(b"\n", pos)
    if end < 0:
        raise ParseError("truncated PFM header", offset=pos)
    return data[pos:end].decode("latin-1").strip(), end + 1


def read_pfm(data: bytes) -> PfmImage:
    magic, pos = _pfm_line(data, 0)
    if magic not in ("Pf", "PF"):
        raise ParseError(f"bad PFM magic {magic!r}", offset=0)
    channels = 3 if magic == "PF" else 1
    dims_pos = pos
    dims_line, pos = _pfm_line(data, pos)
    parts = dims_line.split()
    if len(parts) != 2:
        raise ParseError(f"expected 'width height', got {dims_line!r}", offset=dims_pos)
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"non-integer PFM dimensions {dims_line!r}", offset=dims_pos) from None
    if width <= 0 or height <= 0:
        raise ParseError(f"non-positive PFM dimensions {width}x{height}", offset=dims_pos)
    scale_pos = pos
    scale_line, pos = _pfm_line(data, pos)
    try:
        scale = float(scale_line)
    except ValueError:
        raise ParseError(f"bad PFM scale {scale_line!r}", offset=scale_pos) from None
    if scale == 0:
        raise ParseError("zero PFM scale", offset=scale_pos)
    count = width * height * channels
    expected = count * 4
    payload = data[pos:]
    if len(payload) < expected:
        raise ParseError(
            f"truncated PFM payload: expected {expected} bytes, got {len(payload)}", offset=pos
        )
    if len(payload) > expected:
        raise ParseError(
            f"trailing bytes after PFM payload: expected {expected}, got {len(payload)}", offset=pos + expected
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload, dtype=dtype, count=count)
    shape = (height, width, 3) if channels == 3 else (height, width)
    img = flat.reshape(shape)
    return PfmImage(np.flipud(img).astype(np.float32), scale)


def write_pfm(img: PfmImage) -> bytes:
    magic = b"PF" if img.channels == 3 else b"Pf"
    header = magic + b"\n" + f"{img.width} {img.height}\n".encode() + b"-1.0\n"
    payload = np.flipud(img.data).astype("<f4").tobytes()
    return header + payload


def depth_from_pfm(img: PfmImage) -> "DepthMap":
    """Single-channel PFM to DepthMap; zero or negative pixels are invalid."""
    from .reproject import DepthMap

    if img.channels != 1:
        raise ValueError("depth maps are single-channel PFMs")
    values = img.data.astype(np.float64)
    return DepthMap(np.where(values > 0, values, 0.0), values > 0)


def depth_to_pfm(depth) -> PfmImage:
    return PfmImage(depth.values.astype(np.float32))


# ---------------------------------------------------------------------------
# cam.txt
# ---------------------------------------------------------------------------


def _parse_matrix(lines, start, rows, cols, what):
    mat = np.zeros((rows, cols))
    for r in range(rows):
        ln = start + r
        if ln >= len(lines):
            raise ParseError(f"truncated {what} matrix", line=len(lines))
        parts = lines[ln].split()
        if len(parts) != cols:
            raise ParseError(f"expected {cols} values in {what} row, got {len(parts)}", line=ln + 1)
        try:
            mat[r] = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-numeric value in {what} matrix", line=ln + 1) from None
    return mat


def read_cam(text: str) -> Camera:
    lines = text.splitlines()
    stripped = [ln.strip() for ln in lines]

    def find_keyword(word):
        for i, ln in enumerate(stripped):
            if ln.lower() == word:
                return i
        raise ParseError(f"missing '{word}' section", line=len(lines))

    def next_content(i):
        while i < len(stripped) and not stripped[i]:
            i += 1
        return i

    ext_row = next_content(find_keyword("extrinsic") + 1)
    E = _parse_matrix(stripped, ext_row, 4, 4, "extrinsic")
    int_row = next_content(find_keyword("intrinsic") + 1)
    K = _parse_matrix(stripped, int_row, 3, 3, "intrinsic")
    depth_row = next_content(int_row + 3)
    if depth_row >= len(stripped):
        raise ParseError("missing depth range line", line=len(lines))
    parts = stripped[depth_row].split()
    if len(parts) < 2:
        raise ParseError("depth range line needs 'depth_min depth_interval'", line=depth_row + 1)
    try:
        depth_min, depth_interval = float(parts[0]), float(parts[1])
    except ValueError:
        raise ParseError("non-numeric depth range values", line=depth_row + 1) from None
    try:
        cam = Camera(K=K, E=E, depth_min=depth_min, depth_interval=depth_interval)
    except ValueError as exc:
        raise ParseError(f"invalid camera: {exc}", line=depth_row + 1) from None
    try:
        cam.validate(rtol=1e-3)
    except ValueError as exc:
        warnings.warn(f"camera fails validation: {exc}", stacklevel=2)
    return cam


def write_cam(cam: Camera) -> str:
    def fmt(mat):
        return "\n".join(" ".join(repr(float(v)) for v in row) for row in mat)

    return (
        "extrinsic\n"
        + fmt(cam.E)
        + "\n\nintrinsic\n"
        + fmt(cam.K)
        + "\n\n"
        + f"{cam.depth_min!r} {cam.depth_interval!r}\n"
    )


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_XYZ = ("x", "y", "z")
_PLY_RGB = ("red", "green", "blue")


def read_ply(data: bytes) -> PointCloud:
    end = data.find(b"end_header\n")
    if end < 0:
        raise ParseError("missing PLY end_header", offset=len(data))
    header = data[: end + len(b"end_header\n")]
    body = data[end + len(b"end_header\n"):]
    lines = header.decode("latin-1").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("bad PLY magic", line=1)
    fmt = None
    count = None
    props = []
    for n, raw in enumerate(lines[1:], start=2):
        ln = raw.strip()
        if not ln or ln.startswith("comment"):
            continue
        if ln.startswith("format"):
            parts = ln.split()
            if len(parts) != 3 or parts[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unsupported PLY format line {ln!r}", line=n)
            fmt = parts[1]
        elif ln.startswith("element"):
            parts = ln.split()
            if len(parts) != 3 or parts[1] != "vertex":
                raise ParseError(f"unsupported PLY element {ln!r}", line=n)
            try:
                count = int(parts[2])
            except ValueError:
                raise ParseError(f"bad vertex count in {ln!r}", line=n) from None
            if count < 0:
                raise ParseError(f"negative vertex count {count}", line=n)
        elif ln.startswith("property"):
            parts = ln.split()
            if len(parts) != 3:
                raise ParseError(f"bad property line {ln!r}", line=n)
            props.append((parts[1], parts[2]))
        elif ln == "end_header":
            break
        else:
            raise ParseError(f"unrecognized PLY header line {ln!r}", line=n)
    if fmt is None:
        raise ParseError("missing PLY format line", line=1)
    if count is None:
        raise ParseError("missing PLY vertex element", line=1)
    names = tuple(name for _, name in props)
    types = tuple(tp for tp, _ in props)
    if names == _PLY_XYZ:
        has_rgb = False
        expected_types = ("float",) * 3
    elif names == _PLY_XYZ + _PLY_RGB:
        has_rgb = True
        expected_types = ("float",) * 3 + ("uchar",) * 3
    else:
        raise ParseError(f"unsupported PLY property layout {names!r}", line=1)
    if types != expected_types:
        raise ParseError(f"unsupported PLY property types {types!r}", line=1)

    if fmt == "binary_little_endian":
        rec = np.dtype([("xyz", "<f4", (3,))] + ([("rgb", "u1", (3,))] if has_rgb else []))
        expected = rec.itemsize * count
        if len(body) != expected:
            raise ParseError(
                f"PLY payload size mismatch: expected {expected} bytes, got {len(body)}",
                offset=len(header),
            )
        arr = np.frombuffer(body, dtype=rec, count=count)
        points = arr["xyz"].astype(np.float64)
        colors = arr["rgb"].copy() if has_rgb else None
    else:
        rows = body.decode("latin-1").splitlines()
        if len(rows) != count:
            raise ParseError(
                f"PLY vertex count mismatch: header says {count}, body has {len(rows)} rows",
                line=len(lines) + min(count, len(rows)) + 1,
            )
        width = 6 if has_rgb else 3
        points = np.zeros((count, 3))
        colors = np.zeros((count, 3), dtype=np.uint8) if has_rgb else None
        for i, row in enumerate(rows):
            parts = row.split()
            if len(parts) != width:
                raise ParseError(f"expected {width} vertex fields, got {len(parts)}", line=len(lines) + i + 1)
            try:
                points[i] = [float(p) for p in parts[:3]]
                if has_rgb:
                    colors[i] = [int(p) for p in parts[3:]]
            except ValueError:
                raise ParseError("non-numeric vertex field", line=len(lines) + i + 1) from None
    return PointCloud(points=points, colors=colors)


def write_ply(cloud: PointCloud, binary: bool = True) -> bytes:
    n = cloud.points.shape[0]
    has_rgb = cloud.colors is not None
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {n}", "property float x", "property float y", "property float z"]
    if has_rgb:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode()
    xyz = cloud.points.astype("<f4")
    if binary:
        if has_rgb:
            rec = np.dtype([("xyz", "<f4", (3,)), ("rgb", "u1", (3,))])
            arr = np.empty(n, dtype=rec)
            arr["xyz"] = xyz
            arr["rgb"] = cloud.colors
            return head + arr.tobytes()
        return head + xyz.tobytes()
    rows = []
    for i in range(n):
        row = " ".join(repr(float(v)) for v in xyz[i])
        if has_rgb:
            row += " " + " ".join(str(int(v)) for v in cloud.colors[i])
        rows.append(row)
    return head + ("\n".join(rows) + ("\n" if rows else "")).encode()


# ---------------------------------------------------------------------------
# probability volume container
# ---------------------------------------------------------------------------


def read_probability_volume(data: bytes) -> ProbabilityVolume:
    magic, pos = _pfm_line(data, 0)
    if magic != "PROBVOL":
        raise ParseError(f"bad probability volume magic {magic!r}", offset=0)
    dims_pos = pos
    dims_line, pos = _pfm_line(data, pos)
    parts = dims_line.split()
    if len(parts) != 3:
        raise ParseError(f"expected 'D H W', got {dims_line!r}", offset=dims_pos)
    try:
        d, h, w = (int(p) for p in parts)
    except ValueError:
        raise ParseError(f"non-integer volume dimensions {dims_line!r}", offset=dims_pos) from None
    if d <= 0 or h <= 0 or w <= 0:
        raise ParseError(f"non-positive volume dimensions {dims_line!r}", offset=dims_pos)
    layout_pos = pos
    layout, pos = _pfm_line(data, pos)
    if layout not in ("shared", "perpixel"):
        raise ParseError(f"unknown hypothesis layout {layout!r}", offset=layout_pos)
    n_hyp = d if layout == "shared" else d * h * w
    expected = (n_hyp + d * h * w) * 4
    payload = data[pos:]
    if len(payload) != expected:
        raise ParseError(
            f"probability volume payload size mismatch: expected {expected} bytes, got {len(payload)}",
            offset=pos,
        )
    flat = np.frombuffer(payload, dtype="<f4")
    hyp = flat[:n_hyp].astype(np.float64)
    probs = flat[n_hyp:].astype(np.float64).reshape(d, h, w)
    if layout == "perpixel":
        hyp = hyp.reshape(d, h, w)
    try:
        return ProbabilityVolume(probs=probs, hypotheses=hyp)
    except ValueError as exc:
        raise ParseError(f"invalid probability volume: {exc}", offset=pos) from None


def write_probability_volume(vol: ProbabilityVolume) -> bytes:
    d, h, w = vol.probs.shape
    layout = "shared" if vol.hypotheses.ndim == 1 else "perpixel"
    head = f"PROBVOL\n{d} {h} {w}\n{layout}\n".encode()
    return head + vol.hypotheses.astype("<f4").tobytes() + vol.probs.astype("<f4").tobytes()
