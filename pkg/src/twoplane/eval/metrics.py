"""Box overlap and COCO-style average precision."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..warp import Box

COCO_IOUS: tuple[float, ...] = tuple(np.round(np.linspace(0.5, 0.95, 10), 2).tolist())
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
COCO_AREAS: dict[str, tuple[float, float]] = {
    "all": (0.0, 1e10),
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, 1e10),
}
MAX_DETS = 100
ABSENT = float("nan")


def is_absent(x: float) -> bool:
    return isinstance(x, float) and math.isnan(x)


def iou(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(dets: Sequence[Box], gts: Sequence[Box]) -> np.ndarray:
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)))
    d = np.array([b.xyxy for b in dets], dtype=np.float64)
    g = np.array([b.xyxy for b in gts], dtype=np.float64)
    iw = np.minimum(d[:, None, 2], g[None, :, 2]) - np.maximum(d[:, None, 0], g[None, :, 0])
    ih = np.minimum(d[:, None, 3], g[None, :, 3]) - np.maximum(d[:, None, 1], g[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    da = (d[:, 2] - d[:, 0]) * (d[:, 3] - d[:, 1])
    ga = (g[:, 2] - g[:, 0]) * (g[:, 3] - g[:, 1])
    return inter / (da[:, None] + ga[None, :] - inter)


@dataclass
class ApReport:
    """AP summary; NaN marks a bucket with no ground truth."""

    ap: float = ABSENT
    ap50: float = ABSENT
    ap75: float = ABSENT
    ap_s: float = ABSENT
    ap_m: float = ABSENT
    ap_l: float = ABSENT
    per_class: dict[int, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        def clean(x):
            return None if is_absent(x) else float(x)

        return {
            "ap": clean(self.ap),
            "ap50": clean(self.ap50),
            "ap75": clean(self.ap75),
            "ap_s": clean(self.ap_s),
            "ap_m": clean(self.ap_m),
            "ap_l": clean(self.ap_l),
            "per_class": {str(k): clean(v) for k, v in sorted(self.per_class.items())},
        }


def _match_frame(dets, gts, area_lo, area_hi, thresholds):
    """Greedy score-ordered matching of one frame, one class, one area range.

    Returns (scores, matched[T, D], det_ignored[T, D], n_counted_gt).
    """
    gt_ignore = np.array([not (area_lo <= g.area <= area_hi) for g in gts], dtype=bool)
    gorder = np.argsort(gt_ignore, kind="mergesort")
    gts = [gts[i] for i in gorder]
    gt_ignore = gt_ignore[gorder]
    dorder = np.argsort([-d.score for d in dets], kind="mergesort")[:MAX_DETS]
    dets = [dets[i] for i in dorder]
    ious = iou_matrix(dets, gts)

    T, D, G = len(thresholds), len(dets), len(gts)
    matched = np.zeros((T, D), dtype=bool)
    det_ignored = np.zeros((T, D), dtype=bool)
    for ti, thr in enumerate(thresholds):
        gt_taken = np.zeros(G, dtype=bool)
        for di in range(D):
            best, m = min(thr, 1 - 1e-10), -1
            for gi in range(G):
                if gt_taken[gi]:
                    continue
                # counted ground truth sorts first; stop once only ignored ones remain
                if m > -1 and not gt_ignore[m] and gt_ignore[gi]:
                    break
                if ious[di, gi] < best:
                    continue
                best, m = ious[di, gi], gi
            if m == -1:
                continue
            gt_taken[m] = True
            matched[ti, di] = True
            det_ignored[ti, di] = gt_ignore[m]
    det_out = np.array([not (area_lo <= d.area <= area_hi) for d in dets], dtype=bool)
    det_ignored |= ~matched & det_out[None, :]
    scores = np.array([d.score for d in dets], dtype=np.float64)
    return scores, matched, det_ignored, int((~gt_ignore).sum())


def interpolated_precision(tp: np.ndarray, fp: np.ndarray, n_gt: int) -> np.ndarray:
    """101-point interpolated precision from cumulative TP/FP counts."""
    q = np.zeros(RECALL_POINTS.size)
    if tp.size == 0:
        return q
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    valid = idx < recall.size
    q[valid] = envelope[idx[valid]]
    return q


def precision_table(
    dets: Sequence[Sequence[Box]],
    gts: Sequence[Sequence[Box]],
    iou_thresholds: Sequence[float],
    area: tuple[float, float],
    classes: Sequence[int],
) -> np.ndarray:
    """Interpolated precision [T, R, K]; -1 where a class has no counted ground truth."""
    T, K = len(iou_thresholds), len(classes)
    table = -np.ones((T, RECALL_POINTS.size, K))
    for ki, c in enumerate(classes):
        scores, matched, ignored, n_gt = [], [], [], 0
        for fd, fg in zip(dets, gts):
            cd = [b for b in fd if b.class_id == c]
            cg = [b for b in fg if b.class_id == c]
            if not cd and not cg:
                continue
            s, m, ig, n = _match_frame(cd, cg, area[0], area[1], iou_thresholds)
            scores.append(s)
            matched.append(m)
            ignored.append(ig)
            n_gt += n
        if n_gt == 0:
            continue
        if scores:
            s = np.concatenate(scores)
            order = np.argsort(-s, kind="mergesort")
            m = np.concatenate(matched, axis=1)[:, order]
            ig = np.concatenate(ignored, axis=1)[:, order]
        else:
            m = ig = np.zeros((T, 0), dtype=bool)
        for ti in range(T):
            keep = ~ig[ti]
            tp = np.cumsum(m[ti][keep]).astype(np.float64)
            fp = np.cumsum(~m[ti][keep]).astype(np.float64)
            table[ti, :, ki] = interpolated_precision(tp, fp, n_gt)
    return table


def _mean_present(x: np.ndarray) -> float:
    present = x[x > -1]
    return float(np.mean(present)) if present.size else ABSENT


def coco_ap(
    dets: Sequence[Sequence[Box]],
    gts: Sequence,
    iou_thresholds: Sequence[float] = COCO_IOUS,
    area_ranges: Mapping[str, tuple[float, float]] = COCO_AREAS,
) -> ApReport:
    """COCO-style AP over a sequence of frames.

    `gts` holds per-frame box lists or objects with a `.boxes` attribute; frames
    pair with `dets` by position. Greedy matching in score order, 101-point
    interpolation, classes averaged over those with ground truth.
    """
    gts = [getattr(g, "boxes", g) for g in gts]
    if len(dets) != len(gts):
        raise ValueError(f"{len(dets)} detection frames vs {len(gts)} ground-truth frames")
    classes = sorted({b.class_id for frame in gts for b in frame})
    report = ApReport()
    if not classes:
        return report
    thresholds = list(iou_thresholds)

    def thr_index(t):
        hits = [i for i, x in enumerate(thresholds) if abs(x - t) < 1e-9]
        return hits[0] if hits else None

    if "all" in area_ranges:
        table = precision_table(dets, gts, thresholds, area_ranges["all"], classes)
        report.ap = _mean_present(table)
        for attr, t in (("ap50", 0.5), ("ap75", 0.75)):
            i = thr_index(t)
            if i is not None:
                setattr(report, attr, _mean_present(table[i]))
        report.per_class = {c: _mean_present(table[:, :, k]) for k, c in enumerate(classes)}
    for attr, name in (("ap_s", "small"), ("ap_m", "medium"), ("ap_l", "large")):
        if name in area_ranges:
            table = precision_table(dets, gts, thresholds, area_ranges[name], classes)
            setattr(report, attr, _mean_present(table))
    return report


def group_by_frame(boxes_by_frame: Mapping[int, Sequence[Box]], frame_ids: Sequence[int]):
    lookup = defaultdict(list, boxes_by_frame)
    return [list(lookup[f]) for f in frame_ids]
