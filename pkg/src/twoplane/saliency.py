"""Two-plane perspective saliency.

Each plane gets an exponential row profile in bird's-eye view (BEV), which is
then pulled back into the camera view through the plane homography. The
ground profile favours far rows, the top-plane profile favours near rows.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry
from .errors import BadParam, ValidationError
from .geometry import ImageSize, PlaneKind, PlaneQuad, Point2

FLOOR = 1e-4
MIN_GRID = 8
DEFAULT_GRID = ImageSize(96, 60)


class Direction(str, enum.Enum):
    FAR = "far"
    NEAR = "near"


@dataclass(frozen=True)
class WarpParams:
    """Learnable parameters of the prior for one vanishing point.

    theta and alpha hold (ground-left, ground-right, top-left, top-right).
    Angles and alphas are clamped into their intervals on construction.
    """

    v: Point2
    theta: tuple[float, float, float, float] = (0.15, 0.15, 0.15, 0.15)
    alpha: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    nu: float = 2.0
    nu_hat: float = 2.0
    lam: float = 0.3
    kernel_sigma_frac: float = 0.06

    def __post_init__(self):
        v = self.v if isinstance(self.v, Point2) else Point2(*self.v)
        object.__setattr__(self, "v", v)
        if len(self.theta) != 4 or len(self.alpha) != 4:
            raise BadParam("theta and alpha need exactly 4 entries each")
        object.__setattr__(self, "theta", tuple(geometry.clamp_theta(t) for t in self.theta))
        object.__setattr__(self, "alpha", tuple(geometry.clamp_alpha(a) for a in self.alpha))
        for name in ("nu", "nu_hat"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise BadParam(f"{name} must be finite")
            if not val > 1:
                raise BadParam(f"{name} must exceed 1, got {val}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise BadParam(f"lambda must be >= 0, got {self.lam}")
        if not 0 < self.kernel_sigma_frac <= 0.5:
            raise BadParam(f"kernel_sigma_frac must be in (0, 0.5], got {self.kernel_sigma_frac}")

    @classmethod
    def centered(cls, size: ImageSize, **kw) -> "WarpParams":
        return cls(v=Point2(size.w / 2, size.h / 2), **kw)

    def replace(self, **kw) -> "WarpParams":
        fields = dict(
            v=self.v, theta=self.theta, alpha=self.alpha, nu=self.nu,
            nu_hat=self.nu_hat, lam=self.lam, kernel_sigma_frac=self.kernel_sigma_frac,
        )
        fields.update(kw)
        return WarpParams(**fields)

    def floats(self) -> tuple[float, ...]:
        return (
            self.v.x, self.v.y, *self.theta, *self.alpha,
            self.nu, self.nu_hat, self.lam, self.kernel_sigma_frac,
        )


@dataclass(frozen=True)
class MultiVpConfig:
    entries: tuple[tuple[WarpParams, float], ...]

    def __post_init__(self):
        entries = tuple((p, float(w)) for p, w in self.entries)
        if not entries:
            raise ValidationError("multi-VP config needs at least one entry")
        if any(not (math.isfinite(w) and w >= 0) for _, w in entries):
            raise ValidationError("multi-VP weights must be finite and >= 0")
        if not sum(w for _, w in entries) > 0:
            raise ValidationError("multi-VP weights must not all be zero")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def uniform(cls, params: Sequence[WarpParams]) -> "MultiVpConfig":
        n = len(params)
        return cls(tuple((p, 1.0 / n) for p in params))


@dataclass(frozen=True)
class SaliencyMap:
    """Strictly positive saliency on a (grid_h, grid_w) row-major grid."""

    grid: np.ndarray = field(repr=False)
    target_size: ImageSize
    param_hash: bytes = b"\0" * 32

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or g.shape[0] < MIN_GRID or g.shape[1] < MIN_GRID:
            raise ValidationError(f"saliency grid must be at least 8x8, got shape {g.shape}")
        if not np.all(g > 0):
            raise ValidationError("saliency must be strictly positive")
        if len(self.param_hash) != 32:
            raise ValidationError("param_hash must be 32 bytes")
        g = g.copy()
        g.flags.writeable = False
        object.__setattr__(self, "grid", g)

    @property
    def grid_size(self) -> ImageSize:
        return ImageSize(self.grid.shape[1], self.grid.shape[0])


# -- hashing -----------------------------------------------------------------

def _sizes_bytes(size: ImageSize, grid: ImageSize) -> bytes:
    return struct.pack("<4I", size.w, size.h, grid.w, grid.h)


def param_hash(params: WarpParams | MultiVpConfig, size: ImageSize, grid: ImageSize) -> bytes:
    """SHA-256 over a canonical little-endian serialization of parameters and sizes."""
    h = hashlib.sha256()
    if isinstance(params, WarpParams):
        h.update(b"WP1")
        h.update(struct.pack("<14d", *params.floats()))
    else:
        h.update(b"MV1")
        h.update(struct.pack("<I", len(params.entries)))
        for p, w in params.entries:
            h.update(struct.pack("<15d", *p.floats(), w))
    h.update(_sizes_bytes(size, grid))
    return h.digest()


# -- construction ------------------------------------------------------------

def bev_profile(nu: float, rows: int, direction: Direction | str) -> np.ndarray:
    """Exponential BEV row profile indexed by distance row z (z = 0 nearest).

    FAR peaks at 1 on the farthest row, NEAR peaks at 1 on the nearest row.
    """
    if not nu > 1:
        raise BadParam(f"nu must exceed 1, got {nu}")
    if rows < MIN_GRID:
        raise BadParam(f"need at least {MIN_GRID} rows, got {rows}")
    z = np.arange(rows, dtype=np.float64) / (rows - 1)
    if Direction(direction) is Direction.FAR:
        return np.exp(nu * (z - 1.0))
    return np.exp(nu * ((1.0 - z) - 1.0))


def _cell_centers(n: int, extent: float) -> np.ndarray:
    return (np.arange(n, dtype=np.float64) + 0.5) * (extent / n)


def _bilinear_nodes(nodes_x, nodes_y, values, qx, qy):
    """Bilinear lookup on a rectilinear node grid. Callers keep queries inside the hull."""
    ix = np.clip(np.searchsorted(nodes_x, qx, side="right") - 1, 0, len(nodes_x) - 2)
    iy = np.clip(np.searchsorted(nodes_y, qy, side="right") - 1, 0, len(nodes_y) - 2)
    tx = (qx - nodes_x[ix]) / (nodes_x[ix + 1] - nodes_x[ix])
    ty = (qy - nodes_y[iy]) / (nodes_y[iy + 1] - nodes_y[iy])
    v00 = values[iy, ix]
    v01 = values[iy, ix + 1]
    v10 = values[iy + 1, ix]
    v11 = values[iy + 1, ix + 1]
    top = v00 * (1 - tx) + v01 * tx
    bottom = v10 * (1 - tx) + v11 * tx
    return top * (1 - ty) + bottom * ty


def _is_convex(quad: PlaneQuad) -> bool:
    nl, nr, fl, fr = quad.as_array()
    ring = (nl, nr, fr, fl)
    turns = []
    for i in range(4):
        (ax, ay), (bx, by) = ring[(i + 1) % 4] - ring[i], ring[(i + 2) % 4] - ring[(i + 1) % 4]
        turns.append(ax * by - ay * bx)
    return all(t > 0 for t in turns) or all(t < 0 for t in turns)


def _quad_coverage(quad: PlaneQuad, cx, cy, cell_w, cell_h):
    """Approximate share of each cell footprint inside the quad.

    Per side, the signed distance of the cell centre from the side's line is
    divided by the footprint width along that line's normal; the four clipped
    fractions are multiplied. Exact for cells cut by one axis-aligned side.
    """
    nl, nr, fl, fr = quad.as_array()
    centroid = (nl + nr + fl + fr) / 4
    cover = np.ones_like(cx)
    for a, b in ((nl, nr), (nr, fr), (fr, fl), (fl, nl)):
        n = np.array([a[1] - b[1], b[0] - a[0]])
        n /= np.hypot(*n)
        if n @ (centroid - a) < 0:
            n = -n
        dist = n[0] * (cx - a[0]) + n[1] * (cy - a[1])
        width = abs(n[0]) * cell_w + abs(n[1]) * cell_h
        cover *= np.clip(0.5 + dist / width, 0.0, 1.0)
    return cover


def saliency_from_quad(
    quad: PlaneQuad,
    nu: float,
    direction: Direction | str,
    size: ImageSize,
    grid: ImageSize = DEFAULT_GRID,
) -> np.ndarray:
    """Camera-view saliency grid (grid.h, grid.w) for one plane quad.

    Each camera cell centre is taken through the homography and the BEV profile
    is sampled bilinearly there. Cells straddling the plane boundary are blended
    towards the floor value by the share of their footprint that falls outside,
    which keeps the map continuous in the quad corners; cells entirely off the
    plane, or beyond its vanishing line, get the floor value.
    """
    if grid.w < MIN_GRID or grid.h < MIN_GRID:
        raise BadParam(f"saliency grid must be at least 8x8, got {grid.w}x{grid.h}")
    H = geometry.homography_from_quad(quad, size)
    w, h = float(size.w), float(size.h)
    cell_w, cell_h = w / grid.w, h / grid.h

    profile = bev_profile(nu, grid.h, direction)
    # BEV image row r (top = 0) is distance row z = grid.h - 1 - r; the node
    # grid repeats the edge values out to the rectangle border
    bev = np.broadcast_to(profile[::-1, None], (grid.h, grid.w))
    nodes = np.pad(bev, 1, mode="edge")
    nodes_x = np.concatenate([[0.0], _cell_centers(grid.w, w), [w]])
    nodes_y = np.concatenate([[0.0], _cell_centers(grid.h, h), [h]])

    cx, cy = np.meshgrid(_cell_centers(grid.w, w), _cell_centers(grid.h, h))
    m = H.m
    X = m[0, 0] * cx + m[0, 1] * cy + m[0, 2]
    Y = m[1, 0] * cx + m[1, 1] * cy + m[1, 2]
    W = m[2, 0] * cx + m[2, 1] * cy + m[2, 2]
    centroid = quad.as_array().mean(axis=0)
    w_inside = m[2, 0] * centroid[0] + m[2, 1] * centroid[1] + m[2, 2]
    front = (W * np.sign(w_inside)) > geometry.W_EPS
    Wf = np.where(front, W, 1.0)
    bx, by = X / Wf, Y / Wf
    if _is_convex(quad):
        coverage = np.where(front, _quad_coverage(quad, cx, cy, cell_w, cell_h), 0.0)
    else:
        # the plane's vanishing line crosses the quad; only a hard inside test is meaningful
        coverage = (front & (bx >= 0) & (bx <= w) & (by >= 0) & (by <= h)).astype(np.float64)

    out = np.full((grid.h, grid.w), FLOOR)
    hit = coverage > 0
    value = _bilinear_nodes(nodes_x, nodes_y, nodes,
                            np.clip(bx[hit], 0.0, w), np.clip(by[hit], 0.0, h))
    out[hit] = FLOOR + (value - FLOOR) * coverage[hit]
    return out


def plane_quad_for(params: WarpParams, kind: PlaneKind | str, size: ImageSize) -> PlaneQuad:
    kind = PlaneKind(kind)
    i = 0 if kind is PlaneKind.GROUND else 2
    return geometry.plane_quad(
        params.v, params.theta[i], params.theta[i + 1],
        params.alpha[i], params.alpha[i + 1], kind, size,
    )


def plane_saliency(
    params: WarpParams, kind: PlaneKind | str, size: ImageSize, grid: ImageSize = DEFAULT_GRID
) -> SaliencyMap:
    kind = PlaneKind(kind)
    quad = plane_quad_for(params, kind, size)
    if kind is PlaneKind.GROUND:
        values = saliency_from_quad(quad, params.nu, Direction.FAR, size, grid)
    else:
        values = saliency_from_quad(quad, params.nu_hat, Direction.NEAR, size, grid)
    return SaliencyMap(values, size, param_hash(params, size, grid))


def two_plane_saliency(
    params: WarpParams, size: ImageSize, grid: ImageSize = DEFAULT_GRID
) -> SaliencyMap:
    """Ground saliency plus lambda times top-plane saliency."""
    ground = plane_saliency(params, PlaneKind.GROUND, size, grid).grid
    top = plane_saliency(params, PlaneKind.TOP, size, grid).grid
    return SaliencyMap(ground + params.lam * top, size, param_hash(params, size, grid))


def multi_vp_saliency(
    cfg: MultiVpConfig, size: ImageSize, grid: ImageSize = DEFAULT_GRID
) -> SaliencyMap:
    total = np.zeros((grid.h, grid.w))
    for params, weight in cfg.entries:
        total = total + weight * two_plane_saliency(params, size, grid).grid
    return SaliencyMap(total, size, param_hash(cfg, size, grid))


def build(
    params: WarpParams | MultiVpConfig, size: ImageSize, grid: ImageSize = DEFAULT_GRID
) -> SaliencyMap:
    if isinstance(params, MultiVpConfig):
        return multi_vp_saliency(params, size, grid)
    return two_plane_saliency(params, size, grid)


def uniform_saliency(size: ImageSize, grid: ImageSize = DEFAULT_GRID) -> SaliencyMap:
    """Constant saliency; its warp is a plain uniform resize."""
    digest = hashlib.sha256(b"UNIFORM1" + _sizes_bytes(size, grid)).digest()
    return SaliencyMap(np.ones((grid.h, grid.w)), size, digest)
