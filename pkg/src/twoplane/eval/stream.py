"""Streaming evaluation on a virtual clock.

Frames arrive at a fixed period. A single simulated detector, whenever idle,
grabs the most recently arrived frame it has not processed yet and emits its
predictions after a sampled latency. Each ground-truth frame is scored against
the last emission strictly before its arrival. Time is kept as exact
fractions of a millisecond, so schedules never depend on float rounding or on
the wall clock.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ..errors import ValidationError
from ..warp import Box, WarpField, unwarp_boxes, warp_boxes
from .metrics import COCO_AREAS, COCO_IOUS, ApReport, coco_ap

MIN_LATENCY_MS = 0.1
SMALL_AREA = 32.0**2
_LATENCY_STREAM = 0
_DETECTOR_STREAM = 1


def _rng(*key: int) -> np.random.Generator:
    """Counter-based generator keyed by integers, independent of call order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_id: int
    timestamp: float  # ms
    boxes: tuple[Box, ...] = ()
    track_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.track_ids is not None:
            ids = tuple(self.track_ids)
            if len(ids) != len(self.boxes):
                raise ValidationError(f"frame {self.frame_id}: {len(ids)} track ids for {len(self.boxes)} boxes")
            object.__setattr__(self, "track_ids", ids)


@dataclass(frozen=True)
class FrameSequence:
    """Frames at a constant period; arrival k happens exactly at k * 1000 / fps ms."""

    frames: tuple[GroundTruthFrame, ...]
    fps: float = 30.0

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not self.fps > 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        t = [f.timestamp for f in frames]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValidationError("frame timestamps must be strictly increasing")
        period = 1000.0 / self.fps
        for k, f in enumerate(frames):
            if abs((f.timestamp - t[0]) - k * period) > 1e-3:
                raise ValidationError(
                    f"frame {f.frame_id} at {f.timestamp} ms breaks the {period:.4f} ms period"
                )

    @property
    def period(self) -> Fraction:
        return Fraction(1000) / Fraction(self.fps)

    def arrival(self, k: int) -> Fraction:
        return k * self.period

    def __len__(self):
        return len(self.frames)

    @classmethod
    def from_boxes(cls, boxes_per_frame: Sequence[Sequence[Box]], fps: float = 30.0) -> "FrameSequence":
        period = 1000.0 / fps
        return cls(
            tuple(GroundTruthFrame(k, k * period, tuple(b)) for k, b in enumerate(boxes_per_frame)),
            fps,
        )


class LatencyKind(str, enum.Enum):
    CONSTANT = "constant"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class LatencyModel:
    kind: LatencyKind = LatencyKind.CONSTANT
    mean: float = 0.0
    std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LatencyKind(self.kind))
        if not (math.isfinite(self.mean) and self.mean >= 0):
            raise ValidationError(f"latency mean must be >= 0, got {self.mean}")
        if not (math.isfinite(self.std) and self.std >= 0):
            raise ValidationError(f"latency std must be >= 0, got {self.std}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("latency seed must fit in u64")

    def sample(self, frame_id: int) -> float:
        """Latency in ms for processing the given frame."""
        if self.kind is LatencyKind.CONSTANT:
            return float(self.mean)
        value = _rng(self.seed, _LATENCY_STREAM, frame_id).normal(self.mean, self.std)
        return max(MIN_LATENCY_MS, float(value))


@dataclass(frozen=True)
class MockConfig:
    jitter_px: float = 0.0
    drop_small_prob: float = 0.0
    score_noise: float = 0.0

    def __post_init__(self):
        if self.jitter_px < 0 or self.score_noise < 0:
            raise ValidationError("jitter_px and score_noise must be >= 0")
        if not 0 <= self.drop_small_prob <= 1:
            raise ValidationError(f"drop_small_prob must be in [0, 1], got {self.drop_small_prob}")


def mock_detect(
    gt: GroundTruthFrame,
    cfg: MockConfig = MockConfig(),
    seed: int = 0,
    warp_field: WarpField | None = None,
) -> list[Box]:
    """Stand-in detector: perturbed copies of the ground truth.

    With a warp field the perturbation and the small-object drop happen in
    warped coordinates (what a detector on the warped frame would see) and the
    boxes are mapped back to original coordinates afterwards. The random draws
    depend only on (seed, frame_id).
    """
    rng = _rng(seed, _DETECTOR_STREAM, gt.frame_id)
    boxes = list(gt.boxes)
    n = len(boxes)
    jitter = rng.normal(0.0, 1.0, size=(n, 4)) * cfg.jitter_px
    drop_draw = rng.random(n)
    noise = rng.normal(0.0, 1.0, size=n) * cfg.score_noise
    if warp_field is not None and boxes:
        # objects entirely outside the frame are invisible to a detector on the warped image
        iw, ih = warp_field.in_size.w - 1, warp_field.in_size.h - 1
        visible = [min(b.x2, iw) > max(b.x1, 0.0) and min(b.y2, ih) > max(b.y1, 0.0) for b in boxes]
        keep = [k for k, ok in enumerate(visible) if ok]
        boxes = warp_boxes([boxes[k] for k in keep], warp_field, clip=True)
        jitter, drop_draw, noise = jitter[keep], drop_draw[keep], noise[keep]
        w, h = warp_field.out_size.w - 1, warp_field.out_size.h - 1
    out = []
    for b, j, d, e in zip(boxes, jitter, drop_draw, noise):
        if b.area < SMALL_AREA and d < cfg.drop_small_prob:
            continue
        x1, x2 = sorted((b.x1 + j[0], b.x2 + j[2]))
        y1, y2 = sorted((b.y1 + j[1], b.y2 + j[3]))
        if warp_field is not None:
            x1, x2 = min(max(x1, 0.0), w), min(max(x2, 0.0), w)
            y1, y2 = min(max(y1, 0.0), h), min(max(y2, 0.0), h)
        if not (x2 > x1 and y2 > y1):
            continue
        score = min(max(1.0 - abs(float(e)), 0.0), 1.0)
        out.append(replace(b, x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2), score=score))
    if warp_field is not None and out:
        out = unwarp_boxes(out, warp_field)
    return out


@dataclass(frozen=True)
class MockDetector:
    cfg: MockConfig = MockConfig()
    seed: int = 0
    warp_field: WarpField | None = None

    def __call__(self, gt: GroundTruthFrame) -> list[Box]:
        return mock_detect(gt, self.cfg, self.seed, self.warp_field)


@dataclass(frozen=True)
class StreamEvent:
    emit_time: Fraction  # ms
    source_frame_id: int
    start_time: Fraction
    predictions: tuple[Box, ...]


@dataclass
class StreamTimeline:
    events: list[StreamEvent] = field(default_factory=list)

    def __post_init__(self):
        times = [e.emit_time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("timeline emit times must be non-decreasing")

    @property
    def processed_frames(self) -> list[int]:
        return [e.source_frame_id for e in self.events]

    @property
    def emit_times(self) -> list[float]:
        return [float(e.emit_time) for e in self.events]

    def throughput_fps(self) -> float:
        """Emitted results per second of virtual time from t = 0 to the last emission."""
        if not self.events or self.events[-1].emit_time == 0:
            return 0.0
        return len(self.events) / (float(self.events[-1].emit_time) / 1000.0)

    def summary(self) -> dict:
        return {
            "events": len(self.events),
            "processed_frames": self.processed_frames,
            "emit_times_ms": self.emit_times,
            "throughput_fps": self.throughput_fps(),
        }


class Policy(str, enum.Enum):
    PROCESS_LATEST = "process_latest"


def simulate_stream(
    seq: FrameSequence,
    detector,
    latency: LatencyModel,
    policy: Policy | str = Policy.PROCESS_LATEST,
) -> StreamTimeline:
    """Discrete-event run of one detector over the sequence.

    Frame 0 arrives at t = 0. When the detector becomes idle at time t it takes
    the latest frame with arrival <= t; if that frame was already processed it
    waits for the next arrival. No frame is processed twice.
    """
    if Policy(policy) is not Policy.PROCESS_LATEST:
        raise ValidationError(f"unsupported policy {policy}")
    n = len(seq)
    events: list[StreamEvent] = []
    t = Fraction(0)
    last = -1
    while last < n - 1:
        k = min(n - 1, math.floor(t / seq.period))
        if k <= last:
            k = last + 1
            t = seq.arrival(k)
        frame = seq.frames[k]
        done = t + Fraction(latency.sample(frame.frame_id))
        events.append(StreamEvent(done, frame.frame_id, t, tuple(detector(frame))))
        last, t = k, done
    return StreamTimeline(events)


def pair_predictions(timeline: StreamTimeline, seq: FrameSequence) -> list[int | None]:
    """Index of the last event emitted strictly before each frame's arrival."""
    times = [e.emit_time for e in timeline.events]
    out = []
    for k in range(len(seq)):
        i = bisect.bisect_left(times, seq.arrival(k)) - 1
        out.append(i if i >= 0 else None)
    return out


def streaming_ap(
    timeline: StreamTimeline,
    seq: FrameSequence,
    iou_thresholds: Sequence[float] = COCO_IOUS,
    area_ranges: Mapping[str, tuple[float, float]] = COCO_AREAS,
) -> ApReport:
    """sAP: AP with every frame scored against the newest emission before it arrived."""
    pairs = pair_predictions(timeline, seq)
    dets = [list(timeline.events[i].predictions) if i is not None else [] for i in pairs]
    return coco_ap(dets, seq.frames, iou_thresholds, area_ranges)


def offline_ap(
    seq: FrameSequence,
    detector,
    iou_thresholds: Sequence[float] = COCO_IOUS,
    area_ranges: Mapping[str, tuple[float, float]] = COCO_AREAS,
) -> ApReport:
    """Latency-free AP of the same detector, every frame scored against its own output."""
    return coco_ap([detector(f) for f in seq.frames], seq.frames, iou_thresholds, area_ranges)
