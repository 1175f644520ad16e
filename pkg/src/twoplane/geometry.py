"""Plane quadrilaterals from a vanishing point, homographies, and line-based VP estimation.

Image coordinates are pixels with the origin at the top-left corner, x to the
right and y down. Quad corners are always stored in the order
(near-left, near-right, far-left, far-right) as seen from the camera.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllParallel, AtInfinity, DegenerateQuad, DegenerateSegment, ValidationError

THETA_MARGIN = 1e-3
THETA_MIN = -math.pi / 2 + THETA_MARGIN
THETA_MAX = math.pi / 2 - THETA_MARGIN
PARALLEL_TOL = 1e-6  # rad
COLLINEAR_AREA = 1e-6  # px^2
W_EPS = 1e-12
DET_MIN = 1e-12  # on the Hartley-normalized matrix
COND_MAX = 1e14


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"point must be finite, got ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class ImageSize:
    w: int
    h: int

    def __post_init__(self):
        if int(self.w) != self.w or int(self.h) != self.h:
            raise ValidationError(f"image size must be integral, got {self.w}x{self.h}")
        if self.w < 2 or self.h < 2:
            raise ValidationError(f"image size must be at least 2x2, got {self.w}x{self.h}")

    def __iter__(self):
        yield self.w
        yield self.h

    def scaled(self, factor: float) -> "ImageSize":
        """Uniform down-sampling of both dimensions, rounded to the nearest pixel."""
        return ImageSize(max(2, int(round(self.w * factor))), max(2, int(round(self.h * factor))))


class PlaneKind(str, enum.Enum):
    GROUND = "ground"
    TOP = "top"


def _triangle_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _check_not_collinear(pts: np.ndarray) -> None:
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        area = _triangle_area(pts[i], pts[j], pts[k])
        if not area > COLLINEAR_AREA:
            raise DegenerateQuad(
                f"corners {i}, {j}, {k} are collinear (triangle area {area:.3g} px^2)"
            )


@dataclass(frozen=True)
class PlaneQuad:
    corners: tuple[Point2, Point2, Point2, Point2]
    kind: PlaneKind = PlaneKind.GROUND

    def __post_init__(self):
        if len(self.corners) != 4:
            raise DegenerateQuad(f"a quad needs 4 corners, got {len(self.corners)}")
        corners = tuple(c if isinstance(c, Point2) else Point2(*c) for c in self.corners)
        object.__setattr__(self, "corners", corners)
        _check_not_collinear(self.as_array())

    @classmethod
    def rectangle(cls, size: ImageSize, kind: PlaneKind = PlaneKind.GROUND) -> "PlaneQuad":
        """The BEV target rectangle in corner order: near edge at the bottom, far edge on top."""
        w, h = size
        return cls(((0, h), (w, h), (0, 0), (w, 0)), kind)

    def as_array(self) -> np.ndarray:
        return np.array([[c.x, c.y] for c in self.corners], dtype=np.float64)


@dataclass(frozen=True)
class Homography:
    """3x3 projective matrix, scaled so its largest-magnitude entry equals +1."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ValidationError("homography has non-finite entries")
        m = normalize_scale(m)
        # pixel-space determinants of perfectly usable plane maps go below 1e-13,
        # so the absolute det test lives in dlt's normalized frame; here only
        # numerical invertibility is required
        if not np.linalg.cond(m) < COND_MAX:
            raise DegenerateQuad("homography is singular")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __repr__(self):
        rows = ", ".join("[" + ", ".join(f"{v:.6g}" for v in row) + "]" for row in self.m)
        return f"Homography([{rows}])"


def normalize_scale(m: np.ndarray) -> np.ndarray:
    """Divide by the (signed) largest-magnitude entry."""
    m = np.asarray(m, dtype=np.float64)
    flat = m.ravel()
    pivot = flat[np.argmax(np.abs(flat))]
    if pivot == 0:
        raise ValidationError("zero matrix cannot be scale-normalized")
    return m / pivot


@dataclass(frozen=True)
class LineSegment:
    a: Point2
    b: Point2

    def __post_init__(self):
        a = self.a if isinstance(self.a, Point2) else Point2(*self.a)
        b = self.b if isinstance(self.b, Point2) else Point2(*self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not math.hypot(a.x - b.x, a.y - b.y) > 1e-9:
            raise DegenerateSegment(f"segment endpoints coincide: {a} {b}")

    def direction_angle(self) -> float:
        return math.atan2(self.b.y - self.a.y, self.b.x - self.a.x)

    def unit_normal_form(self) -> tuple[np.ndarray, float]:
        """Return (n, c) with |n| = 1 so that the line is n . p = c."""
        d = np.array([self.b.x - self.a.x, self.b.y - self.a.y])
        n = np.array([-d[1], d[0]]) / np.hypot(*d)
        return n, float(n @ self.a.as_array())


def _parallel(l1: LineSegment, l2: LineSegment) -> bool:
    diff = (l1.direction_angle() - l2.direction_angle()) % math.pi
    return min(diff, math.pi - diff) < PARALLEL_TOL


def vp_from_lines(lines: Sequence[LineSegment]) -> Point2:
    """Vanishing point of annotated (image-)parallel lines.

    Two lines give their exact intersection. With more lines the result is the
    point minimizing the sum of squared perpendicular distances to all lines.
    """
    lines = [ln if isinstance(ln, LineSegment) else LineSegment(*ln) for ln in lines]
    if len(lines) < 2:
        raise ValidationError(f"need at least 2 lines, got {len(lines)}")
    if all(_parallel(a, b) for a, b in itertools.combinations(lines, 2)):
        raise AllParallel("every pair of lines is parallel; no finite vanishing point")

    normals, offsets = zip(*(ln.unit_normal_form() for ln in lines))
    A = np.array(normals)
    c = np.array(offsets)
    if len(lines) == 2:
        x, y = np.linalg.solve(A, c)
    else:
        x, y = np.linalg.solve(A.T @ A, A.T @ c)
    return Point2(float(x), float(y))


def clamp_theta(theta: float) -> float:
    return min(max(float(theta), THETA_MIN), THETA_MAX)


def clamp_alpha(alpha: float) -> float:
    return min(max(float(alpha), 0.0), 1.0)


def edge_points(v: Point2, theta_a: float, theta_b: float, kind: PlaneKind, size: ImageSize):
    """Points where the rays from v at the given angles meet the left and right image borders.

    Ground rays go below the horizon, top-plane rays above it.
    """
    w = size.w
    sign = 1.0 if PlaneKind(kind) is PlaneKind.GROUND else -1.0
    ta, tb = math.tan(clamp_theta(theta_a)), math.tan(clamp_theta(theta_b))
    left = Point2(0.0, v.y + sign * v.x * ta)
    right = Point2(float(w), v.y + sign * (w - v.x) * tb)
    return left, right


def plane_quad(
    v: Point2,
    theta_a: float,
    theta_b: float,
    alpha_a: float,
    alpha_b: float,
    kind: PlaneKind,
    size: ImageSize,
) -> PlaneQuad:
    """Quadrilateral of one prior plane in camera view.

    The far corners slide between the image-border edge points (alpha = 1) and
    the vanishing point itself (alpha = 0). The near corners are pinned to the
    bottom image corners for the ground plane and the top corners for the top
    plane. Corners may fall outside the image.
    """
    kind = PlaneKind(kind)
    left, right = edge_points(v, theta_a, theta_b, kind, size)
    a, b = clamp_alpha(alpha_a), clamp_alpha(alpha_b)
    far_left = Point2(a * left.x + (1 - a) * v.x, a * left.y + (1 - a) * v.y)
    far_right = Point2(b * right.x + (1 - b) * v.x, b * right.y + (1 - b) * v.y)
    near_y = float(size.h) if kind is PlaneKind.GROUND else 0.0
    near_left, near_right = Point2(0.0, near_y), Point2(float(size.w), near_y)
    return PlaneQuad((near_left, near_right, far_left, far_right), kind)


def _hartley(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.hypot(*(pts - centroid).T))
    s = math.sqrt(2) / mean_dist
    return np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1.0]])


def dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT: 3x3 matrix H with dst ~ H @ src for >= 4 correspondences."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    Ts, Td = _hartley(src), _hartley(dst)
    ps = (Ts @ np.column_stack([src, np.ones(len(src))]).T).T
    pd = (Td @ np.column_stack([dst, np.ones(len(dst))]).T).T
    rows = []
    for (x, y, _), (u, v, _) in zip(ps, pd):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.array(rows))
    Hn = normalize_scale(vt[-1].reshape(3, 3))
    if not abs(np.linalg.det(Hn)) > DET_MIN:
        raise DegenerateQuad("correspondences admit no invertible homography")
    return np.linalg.inv(Td) @ Hn @ Ts


def homography_from_quad(src: PlaneQuad, bev: ImageSize) -> Homography:
    """Homography taking the camera-view quad onto the BEV rectangle.

    Near corners land on the bottom edge of the rectangle and far corners on the
    top edge, so BEV distance from the camera grows upward.
    """
    target = PlaneQuad.rectangle(bev).as_array()
    H = Homography(dlt(src.as_array(), target))
    mapped = apply_homography_array(H, src.as_array())
    err = np.max(np.abs(mapped - target))
    if not err < 1e-6:
        raise DegenerateQuad(f"homography reproduces corners only to {err:.3g} px")
    return H


def apply_homography_array(H: Homography, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    hom = pts @ H.m[:, :2].T + H.m[:, 2]
    w = hom[:, 2]
    if np.any(np.abs(w) <= W_EPS):
        raise AtInfinity("point maps to the line at infinity")
    return hom[:, :2] / w[:, None]


def apply_homography(H: Homography, p: Point2) -> Point2:
    x, y = apply_homography_array(H, np.array([[p.x, p.y]]))[0]
    return Point2(float(x), float(y))


def parse_lines(doc: dict) -> list[LineSegment]:
    """Parse the `{"lines": [[[x1, y1], [x2, y2]], ...]}` annotation format."""
    try:
        raw: Iterable = doc["lines"]
        return [LineSegment(Point2(*map(float, a)), Point2(*map(float, b))) for a, b in raw]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed lines document: {exc}") from exc
