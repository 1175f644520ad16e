"""Separable saliency-guided warps.

A saliency map is marginalized onto the two image axes. Each marginal becomes
a monotone inverse map from output coordinates to input coordinates via a
Gaussian-weighted centroid, and the image is resampled bilinearly through
those two 1-D maps. Because both maps are monotone, axis-aligned boxes stay
axis-aligned and can be carried between warped and original coordinates
corner by corner.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import MonotonicityViolation, NonPositiveSaliency, OutOfBounds, SizeMismatch, ValidationError
from .geometry import ImageSize, Point2
from .saliency import SaliencyMap

DEFAULT_SIGMA_FRAC = 0.06
MONO_TOL = 1e-9
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class AxisMap:
    """Input coordinate (in [0, in_len - 1]) for every output sample along one axis."""

    values: np.ndarray = field(repr=False)
    in_len: int

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size < 2:
            raise ValidationError("an axis map needs at least 2 samples")
        if not np.all(np.isfinite(v)):
            raise ValidationError("axis map has non-finite values")
        if v[0] < -BOUND_TOL or v[-1] > self.in_len - 1 + BOUND_TOL:
            raise OutOfBounds(
                f"axis map spans [{v[0]}, {v[-1]}], outside [0, {self.in_len - 1}]"
            )
        steps = np.diff(v)
        if np.any(steps < -MONO_TOL):
            i = int(np.argmin(steps))
            raise MonotonicityViolation(f"axis map decreases at output sample {i} by {-steps[i]:.3g}")
        v = np.clip(v, 0.0, self.in_len - 1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def out_len(self) -> int:
        return self.values.size

    @classmethod
    def uniform(cls, in_len: int, out_len: int) -> "AxisMap":
        return cls(np.arange(out_len) * ((in_len - 1) / (out_len - 1)), in_len)

    def to_input(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.float64)
        if np.any(c < -BOUND_TOL) or np.any(c > self.out_len - 1 + BOUND_TOL):
            raise OutOfBounds(f"warped coordinate outside [0, {self.out_len - 1}]")
        return np.interp(c, np.arange(self.out_len, dtype=np.float64), self.values)

    def to_output(self, coords) -> np.ndarray:
        """Numeric inverse: binary search over the monotone map, then linear interpolation."""
        c = np.asarray(coords, dtype=np.float64)
        lo, hi = self.values[0], self.values[-1]
        if np.any(c < lo - BOUND_TOL) or np.any(c > hi + BOUND_TOL):
            raise OutOfBounds(f"original coordinate outside covered range [{lo}, {hi}]")
        return np.interp(c, self.values, np.arange(self.out_len, dtype=np.float64))


@dataclass(frozen=True)
class WarpField:
    tx: AxisMap
    ty: AxisMap

    @property
    def in_size(self) -> ImageSize:
        return ImageSize(self.tx.in_len, self.ty.in_len)

    @property
    def out_size(self) -> ImageSize:
        return ImageSize(self.tx.out_len, self.ty.out_len)

    @classmethod
    def identity(cls, size: ImageSize) -> "WarpField":
        return cls(AxisMap(np.arange(size.w), size.w), AxisMap(np.arange(size.h), size.h))

    @classmethod
    def uniform(cls, in_size: ImageSize, out_size: ImageSize) -> "WarpField":
        return cls(AxisMap.uniform(in_size.w, out_size.w), AxisMap.uniform(in_size.h, out_size.h))

    def to_json(self) -> dict:
        return {
            "tx": self.tx.values.tolist(),
            "ty": self.ty.values.tolist(),
            "in_size": [self.in_size.w, self.in_size.h],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "WarpField":
        try:
            w, h = (int(x) for x in doc["in_size"])
            return cls(AxisMap(doc["tx"], w), AxisMap(doc["ty"], h))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed warp field: {exc}") from exc


@dataclass(frozen=True)
class Image:
    """float32 intensities in [0, 1], stored (h, w, channels) with 1 or 3 channels."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ValidationError(f"image must be HxW, HxWx1 or HxWx3, got {d.shape}")
        if np.isnan(d).any():
            raise ValidationError("image contains NaN")
        object.__setattr__(self, "data", d)

    @property
    def size(self) -> ImageSize:
        return ImageSize(self.data.shape[1], self.data.shape[0])

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 1.0
    class_id: int = 0

    def __post_init__(self):
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValidationError(f"box needs x2 > x1 and y2 > y1, got {self.xyxy}")

    @property
    def xyxy(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


# -- axis maps -----------------------------------------------------------------

def marginalize(S: SaliencyMap | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column sums (length grid_w) and row sums (length grid_h)."""
    g = np.asarray(getattr(S, "grid", S), dtype=np.float64)
    return g.sum(axis=0), g.sum(axis=1)


def gaussian_taps(sigma: float) -> tuple[np.ndarray, int]:
    """Gaussian kernel truncated at 3 sigma, and its half-width in samples."""
    r = math.ceil(3 * sigma)
    off = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(off**2) / (2 * sigma**2))
    k[np.abs(off) > 3 * sigma] = 0.0
    return k, r


def resample_marginal(s: np.ndarray, out_len: int) -> np.ndarray:
    """Linearly resample a marginal onto out_len samples spanning the same axis."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == out_len:
        return s.copy()
    return np.interp(np.linspace(0.0, 1.0, out_len), np.linspace(0.0, 1.0, s.size), s)


def inverse_axis_map(
    s: Sequence[float],
    in_len: int,
    out_len: int,
    sigma_frac: float = DEFAULT_SIGMA_FRAC,
    endpoint_rescale: bool = True,
) -> AxisMap:
    """Discretized separable inverse transform for one axis.

    Output sample i maps to the saliency-weighted, Gaussian-weighted centroid of
    the samples around it. The marginal is first resampled to out_len samples,
    the kernel width is sigma_frac of the axis, and the marginal is
    edge-extended by the kernel half-width so a constant marginal yields exactly
    the uniform resize. With endpoint_rescale the map is stretched affinely to
    cover [0, in_len - 1]; otherwise it is only scaled to input units and
    clamped into range.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise ValidationError("saliency marginal must be 1-D with >= 2 samples")
    if not np.all(s > 0) or not np.all(np.isfinite(s)):
        raise NonPositiveSaliency("saliency marginal must be finite and strictly positive")
    if not 0 < sigma_frac <= 0.5:
        raise ValidationError(f"sigma_frac must be in (0, 0.5], got {sigma_frac}")
    if in_len < 2 or out_len < 2:
        raise ValidationError("axis lengths must be >= 2")

    st = resample_marginal(s, out_len)
    k, r = gaussian_taps(sigma_frac * out_len)
    ext = np.concatenate([np.full(r, st[0]), st, np.full(r, st[-1])])
    # centroid as an offset from i, pairing taps at +d and -d so a locally
    # constant marginal contributes exactly zero and the identity stays exact
    offset = np.zeros(out_len)
    for d in range(1, r + 1):
        offset += (k[r + d] * d) * (ext[r + d:r + d + out_len] - ext[r - d:r - d + out_len])
    # symmetric kernel, so correlation == convolution
    den = np.convolve(ext, k, mode="valid")
    t = np.arange(out_len, dtype=np.float64) + offset / den

    if endpoint_rescale:
        values = (t - t[0]) * ((in_len - 1) / (t[-1] - t[0]))
        values[0], values[-1] = 0.0, float(in_len - 1)
        steps = np.diff(values)
        if not np.all(steps > 0):
            i = int(np.argmin(steps))
            raise MonotonicityViolation(
                f"inverse axis map not strictly increasing at sample {i} (step {steps[i]:.3g})"
            )
    else:
        values = np.clip(t * ((in_len - 1) / (out_len - 1)), 0.0, in_len - 1)
    return AxisMap(values, in_len)


def build_warp(
    S: SaliencyMap,
    out_size: ImageSize,
    sigma_frac: float = DEFAULT_SIGMA_FRAC,
    endpoint_rescale: bool = True,
) -> WarpField:
    if out_size.w < 8 or out_size.h < 8:
        raise ValidationError(f"output size must be at least 8x8, got {out_size.w}x{out_size.h}")
    sx, sy = marginalize(S)
    tx = inverse_axis_map(sx, S.target_size.w, out_size.w, sigma_frac, endpoint_rescale)
    ty = inverse_axis_map(sy, S.target_size.h, out_size.h, sigma_frac, endpoint_rescale)
    return WarpField(tx, ty)


# -- resampling ------------------------------------------------------------------

def _taps(coords: np.ndarray, n: int):
    i0 = np.clip(np.floor(coords).astype(np.intp), 0, n - 1)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = (coords - i0).astype(np.float32)
    return i0, i1, frac


@numba.njit(cache=True, nogil=True)
def _bilinear_rows(data, y0, y1, fy, x0, x1, fx, out, start, stop):  # pragma: no cover - jitted
    width, channels = out.shape[1], out.shape[2]
    for i in range(start, stop):
        a, b, f = y0[i], y1[i], fy[i]
        for j in range(width):
            c0, c1, g = x0[j], x1[j], fx[j]
            for k in range(channels):
                p = data[a, c0, k]
                q = data[a, c1, k]
                r = data[b, c0, k]
                s = data[b, c1, k]
                top = p + (q - p) * g
                bottom = r + (s - r) * g
                v = top + (bottom - top) * f
                if v < 0:
                    v = 0
                elif v > 1:
                    v = 1
                out[i, j, k] = v


def warp_image(I: Image, wf: WarpField, workers: int = 1) -> Image:
    """Resample I at (tx[x], ty[y]) for every output pixel.

    Output rows are independent, so splitting them across worker threads does
    not change a single output bit.
    """
    if wf.in_size != I.size:
        raise SizeMismatch(f"warp field expects {wf.in_size}, image is {I.size}")
    data = np.ascontiguousarray(I.data)
    y0, y1, fy = _taps(wf.ty.values, data.shape[0])
    x0, x1, fx = _taps(wf.tx.values, data.shape[1])
    out = np.empty((y0.size, x0.size, data.shape[2]), dtype=np.float32)
    if workers <= 1:
        _bilinear_rows(data, y0, y1, fy, x0, x1, fx, out, 0, y0.size)
    else:
        bounds = np.linspace(0, y0.size, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = [
                pool.submit(_bilinear_rows, data, y0, y1, fy, x0, x1, fx, out, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for job in jobs:
                job.result()
    return Image(out)


# -- points and boxes ------------------------------------------------------------

def _as_xy(pts: Iterable) -> np.ndarray:
    arr = np.array([tuple(p) for p in pts], dtype=np.float64)
    return arr.reshape(-1, 2)


def unwarp_points(pts: Iterable[Point2], wf: WarpField) -> list[Point2]:
    """Warped-image coordinates to original-image coordinates."""
    xy = _as_xy(pts)
    xs, ys = wf.tx.to_input(xy[:, 0]), wf.ty.to_input(xy[:, 1])
    return [Point2(float(x), float(y)) for x, y in zip(xs, ys)]


def warp_points(pts: Iterable[Point2], wf: WarpField) -> list[Point2]:
    """Original-image coordinates to warped-image coordinates."""
    xy = _as_xy(pts)
    xs, ys = wf.tx.to_output(xy[:, 0]), wf.ty.to_output(xy[:, 1])
    return [Point2(float(x), float(y)) for x, y in zip(xs, ys)]


def _clip_box(b: Box, w: float, h: float) -> Box:
    return replace(b, x1=max(b.x1, 0.0), y1=max(b.y1, 0.0), x2=min(b.x2, w), y2=min(b.y2, h))


def _map_boxes(boxes: Sequence[Box], fx, fy) -> list[Box]:
    if not boxes:
        return []
    arr = np.array([b.xyxy for b in boxes], dtype=np.float64)
    x = fx(arr[:, [0, 2]].ravel()).reshape(-1, 2)
    y = fy(arr[:, [1, 3]].ravel()).reshape(-1, 2)
    return [
        replace(b, x1=float(xx[0]), y1=float(yy[0]), x2=float(xx[1]), y2=float(yy[1]))
        for b, xx, yy in zip(boxes, x, y)
    ]


def unwarp_boxes(boxes: Sequence[Box], wf: WarpField, clip: bool = False) -> list[Box]:
    """Map boxes from warped to original coordinates by their two opposite corners.

    With clip=True boxes are first clipped to the warped coordinate range, which
    is handy for detectors that report edges at x = width.
    """
    if clip:
        w, h = wf.out_size
        boxes = [_clip_box(b, w - 1, h - 1) for b in boxes]
    return _map_boxes(boxes, wf.tx.to_input, wf.ty.to_input)


def warp_boxes(boxes: Sequence[Box], wf: WarpField, clip: bool = False) -> list[Box]:
    if clip:
        w, h = wf.in_size
        boxes = [_clip_box(b, w - 1, h - 1) for b in boxes]
    return _map_boxes(boxes, wf.tx.to_output, wf.ty.to_output)
