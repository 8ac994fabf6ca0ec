"""Camera models, depth registration, and the grasp-point graph.

Pixel coordinates follow image convention: u grows rightward, v grows
downward, the origin is the top-left corner. Depth is millimetres as
uint16, with 0 meaning "no return". 3D points are millimetres in the
camera frame (z forward).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


class InvalidDepth(GeometryError):
    """Depth sample is zero (no return) where a valid one is required."""


class OutOfFrame(GeometryError):
    """Pixel coordinates fall outside the frame bounds."""


class BehindCamera(GeometryError):
    """Point has non-positive z, so it has no image."""


class NoValidDepth(GeometryError):
    """No valid depth sample in the lookup window."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise GeometryError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise GeometryError("frame dimensions must be positive")
        if not (0.0 <= self.cx < self.width and 0.0 <= self.cy < self.height):
            raise GeometryError("principal point must lie inside the frame")

    def contains(self, u: float, v: float) -> bool:
        return 0.0 <= u < self.width and 0.0 <= v < self.height


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """Rigid transform taking depth-camera points into the color frame.

    rotation is 3x3 row-major, translation is millimetres.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise GeometryError("rotation must be 3x3")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise GeometryError("rotation must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise GeometryError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


@dataclass
class DepthFrame:
    """A uint16 depth image plus its capture time in microseconds."""

    data: np.ndarray
    timestamp_us: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise GeometryError("depth data must be 2-D")
        if arr.dtype != np.uint16:
            # integer widths are welcome, but floats would truncate silently
            if not np.issubdtype(arr.dtype, np.integer):
                raise GeometryError(f"depth dtype must be integral, got {arr.dtype}")
            if np.any(arr < 0) or np.any(arr > 0xFFFF):
                raise GeometryError("depth values must fit uint16")
            arr = arr.astype(np.uint16)
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def at(self, u: int, v: int) -> int:
        return int(self.data[v, u])


def deproject(pixel: tuple[float, float], depth_mm: float, intr: Intrinsics) -> tuple[float, float, float]:
    """Lift a pixel with known depth to a 3D camera-frame point (mm)."""
    u, v = pixel
    if depth_mm <= 0.0:
        raise InvalidDepth(f"depth {depth_mm} is not positive")
    if not intr.contains(u, v):
        raise OutOfFrame(f"pixel ({u}, {v}) outside {intr.width}x{intr.height}")
    x = (u - intr.cx) * depth_mm / intr.fx
    y = (v - intr.cy) * depth_mm / intr.fy
    return (x, y, depth_mm)


def project(point: tuple[float, float, float], intr: Intrinsics) -> tuple[float, float]:
    """Project a camera-frame point (mm) to pixel coordinates.

    The result may land outside the frame; callers that care must check.
    """
    x, y, z = point
    if z <= 0.0:
        raise BehindCamera(f"z={z} is not positive")
    u = intr.fx * x / z + intr.cx
    v = intr.fy * y / z + intr.cy
    return (u, v)


def register_depth(frame: DepthFrame, depth_intr: Intrinsics,
                   color_intr: Intrinsics, extr: Extrinsics) -> DepthFrame:
    """Reproject a depth frame into the color camera's pixel grid.

    Every valid sample is lifted to 3D, moved into the color frame, and
    written at its rounded projection. When several sources land on one
    target pixel the nearest (smallest z) wins. Pixels that receive no
    sample stay 0.
    """
    if frame.width != depth_intr.width or frame.height != depth_intr.height:
        raise GeometryError("frame size does not match depth intrinsics")
    out = np.zeros((color_intr.height, color_intr.width), dtype=np.uint16)

    vv, uu = np.nonzero(frame.data)
    if len(uu) == 0:
        return DepthFrame(out, frame.timestamp_us)
    z = frame.data[vv, uu].astype(np.float64)
    x = (uu - depth_intr.cx) * z / depth_intr.fx
    y = (vv - depth_intr.cy) * z / depth_intr.fy
    pts = extr.apply(np.stack([x, y, z], axis=1))

    front = pts[:, 2] > 0.0
    pts = pts[front]
    pu = np.rint(color_intr.fx * pts[:, 0] / pts[:, 2] + color_intr.cx).astype(np.int64)
    pv = np.rint(color_intr.fy * pts[:, 1] / pts[:, 2] + color_intr.cy).astype(np.int64)
    inside = (pu >= 0) & (pu < color_intr.width) & (pv >= 0) & (pv < color_intr.height)
    pu, pv = pu[inside], pv[inside]
    pz = pts[inside, 2]

    # Write far samples first so near ones overwrite them.
    order = np.argsort(-pz, kind="stable")
    depth_u16 = np.clip(np.rint(pz), 1, 0xFFFF).astype(np.uint16)
    out[pv[order], pu[order]] = depth_u16[order]
    return DepthFrame(out, frame.timestamp_us)


@dataclass(frozen=True)
class GraspPoint:
    """One candidate target: pixel position, depth, and identity."""

    u: int
    v: int
    d: float
    object_id: int
    label: str


@dataclass(frozen=True)
class HandCentroid:
    u: float
    v: float
    d: float


def _median_window_depth(frame: DepthFrame, cu: int, cv: int, radius: int = 2) -> float:
    """Median of the valid samples in a (2*radius+1)^2 window, or 0."""
    u0, u1 = max(cu - radius, 0), min(cu + radius + 1, frame.width)
    v0, v1 = max(cv - radius, 0), min(cv + radius + 1, frame.height)
    window = frame.data[v0:v1, u0:u1]
    valid = window[window > 0]
    if valid.size == 0:
        return 0.0
    return float(np.median(valid))


def extract_grasp_point(box: tuple[float, float, float, float], frame: DepthFrame,
                        object_id: int, label: str) -> GraspPoint:
    """Turn a detection box into a grasp point at the box center.

    Depth comes from the center pixel; if that sample is invalid, the
    median of the valid samples in the surrounding 5x5 window is used.
    Raises NoValidDepth when the window has no valid sample either.
    """
    x1, y1, x2, y2 = box
    if x2 <= x1 or y2 <= y1:
        raise GeometryError(f"degenerate box {box}")
    cu = int(np.rint((x1 + x2) / 2.0))
    cv = int(np.rint((y1 + y2) / 2.0))
    cu = min(max(cu, 0), frame.width - 1)
    cv = min(max(cv, 0), frame.height - 1)
    d = float(frame.at(cu, cv))
    if d <= 0.0:
        d = _median_window_depth(frame, cu, cv)
    if d <= 0.0:
        raise NoValidDepth(f"no depth near box center ({cu}, {cv})")
    return GraspPoint(u=cu, v=cv, d=d, object_id=object_id, label=label)


@dataclass(frozen=True)
class GraphEdge:
    i: int
    j: int
    length: float


@dataclass(frozen=True)
class GraspPointGraph:
    nodes: tuple[GraspPoint, ...]
    edges: tuple[GraphEdge, ...]


def node_distance(node: GraspPoint, hand: HandCentroid) -> float:
    """Pixel-pixel-depth distance between a node and the hand.

    Mixed units by design: u and v are pixels, d is millimetres. The
    triple is treated as one 3-vector, matching how targets are ranked.
    """
    return math.sqrt((node.u - hand.u) ** 2 + (node.v - hand.v) ** 2 + (node.d - hand.d) ** 2)


def metric_node_distance(intr: Intrinsics):
    """Distance function variant that compares deprojected 3D points (mm)."""

    def dist(node: GraspPoint, hand: HandCentroid) -> float:
        p = deproject((float(node.u), float(node.v)), node.d, intr)
        q = deproject((hand.u, hand.v), hand.d, intr)
        return math.dist(p, q)

    return dist


def build_graph(points: list[GraspPoint], epsilon: float = 200.0) -> GraspPointGraph:
    """Connect grasp points whose mixed-unit distance is at most epsilon.

    Edges are stored once with i < j (indices into the node tuple).
    """
    nodes = tuple(points)
    edges = []
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            a, b = nodes[i], nodes[j]
            length = math.sqrt((a.u - b.u) ** 2 + (a.v - b.v) ** 2 + (a.d - b.d) ** 2)
            if length <= epsilon:
                edges.append(GraphEdge(i, j, length))
    return GraspPointGraph(nodes=nodes, edges=tuple(edges))


def write_pgm(frame: DepthFrame, path) -> None:
    """Write a depth frame as binary PGM, 16-bit big-endian, maxval 65535.

    The capture timestamp rides in a header comment so a round trip
    preserves it.
    """
    header = (f"P5\n# timestamp_us={frame.timestamp_us}\n"
              f"{frame.width} {frame.height}\n65535\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frame.data.astype(">u2").tobytes())


def read_pgm(path) -> DepthFrame:
    """Read a binary PGM written by write_pgm."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise GeometryError("not a binary PGM (magic P5 missing)")

    # Header tokens are whitespace-separated; comment lines start with #.
    pos = 2
    tokens: list[bytes] = []
    timestamp_us = 0
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(blob):
            raise GeometryError("truncated PGM header")
        if blob[pos : pos + 1] == b"#":
            end = blob.find(b"\n", pos)
            if end == -1:
                raise GeometryError("truncated PGM comment")
            m = re.search(rb"timestamp_us=(\d+)", blob[pos:end])
            if m:
                timestamp_us = int(m.group(1))
            pos = end + 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace():
            end += 1
        tokens.append(blob[pos:end])
        pos = end
    pos += 1  # single whitespace byte separates maxval from pixel data

    width, height, maxval = (int(t) for t in tokens)
    if maxval != 65535:
        raise GeometryError(f"expected maxval 65535, got {maxval}")
    expected = width * height * 2
    raster = blob[pos : pos + expected]
    if len(raster) != expected:
        raise GeometryError("truncated PGM raster")
    data = np.frombuffer(raster, dtype=">u2").reshape(height, width).astype(np.uint16)
    return DepthFrame(data, timestamp_us)
