"""Track-quality metrics: average track extension (ATE) and minimum object size tracked (MOS)."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from ..errors import DegenerateTrack, TooShort, ValidationError
from ..warp import Box

MIN_TRACK_FRAMES = 150


def track_extension(l_m: int, l_b: int, l_gt: int) -> float:
    """Length gained by a method over a baseline, relative to the ground-truth track length."""
    if l_gt < MIN_TRACK_FRAMES:
        raise TooShort(f"ground-truth track has {l_gt} frames, need >= {MIN_TRACK_FRAMES}")
    if not (0 <= l_m <= l_gt and 0 <= l_b <= l_gt):
        raise ValidationError(f"track lengths must lie in [0, {l_gt}], got m={l_m}, b={l_b}")
    return (l_m - l_b) / l_gt


def average_track_extension(
    tracks: Iterable[tuple[int, int, int]], weighting: str = "mean"
) -> float:
    """ATE over (l_m, l_b, l_gt) triples; tracks shorter than the minimum are skipped.

    weighting="mean" averages tracks equally, "length" weights each by l_gt.
    """
    if weighting not in ("mean", "length"):
        raise ValidationError(f"weighting must be 'mean' or 'length', got {weighting!r}")
    values, weights = [], []
    for l_m, l_b, l_gt in tracks:
        if l_gt < MIN_TRACK_FRAMES:
            continue
        values.append(track_extension(l_m, l_b, l_gt))
        weights.append(l_gt if weighting == "length" else 1)
    if not values:
        return math.nan
    return sum(v * w for v, w in zip(values, weights)) / sum(weights)


def object_size(box: Box) -> float:
    return math.log(box.area)


def min_object_size_tracked(track_gt: Sequence[Box], smallest_matched: Box) -> float:
    """Where the smallest tracked box sits between the track's smallest and largest ground-truth size.

    Sizes are log-areas; 0 means the method tracked the object at its smallest.
    """
    if not track_gt:
        raise ValidationError("ground-truth track is empty")
    sizes = [object_size(b) for b in track_gt]
    lo, hi = min(sizes), max(sizes)
    if hi == lo:
        raise DegenerateTrack("ground-truth track has a single object size")
    return (object_size(smallest_matched) - lo) / (hi - lo)


def mean_min_object_size(values: Iterable[float]) -> float:
    vals = list(values)
    return sum(vals) / len(vals) if vals else math.nan
