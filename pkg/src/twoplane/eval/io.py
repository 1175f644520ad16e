"""JSON documents for frames, detections, and reports.

Frames and detections share one layout::

    {"frames": [{"id": 0, "t_ms": 0.0,
                 "boxes": [{"xyxy": [x1, y1, x2, y2], "score": 1.0, "class": 0, "track": 7}]}]}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..errors import ValidationError
from ..warp import Box
from .stream import FrameSequence, GroundTruthFrame


def box_from_json(doc: dict) -> Box:
    try:
        x1, y1, x2, y2 = (float(v) for v in doc["xyxy"])
        return Box(x1, y1, x2, y2, float(doc.get("score", 1.0)), int(doc.get("class", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed box {doc!r}: {exc}") from exc


def box_to_json(box: Box, track: int | None = None) -> dict:
    out: dict[str, Any] = {"xyxy": [box.x1, box.y1, box.x2, box.y2], "score": box.score, "class": box.class_id}
    if track is not None:
        out["track"] = track
    return out


def frames_from_json(doc: dict) -> list[GroundTruthFrame]:
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), list):
        raise ValidationError('expected an object with a "frames" list')
    frames = []
    for f in doc["frames"]:
        try:
            boxes = [box_from_json(b) for b in f.get("boxes", [])]
            tracks = [b.get("track") for b in f.get("boxes", [])]
            track_ids = tuple(tracks) if boxes and all(t is not None for t in tracks) else None
            frames.append(GroundTruthFrame(int(f["id"]), float(f["t_ms"]), tuple(boxes), track_ids))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed frame {f!r}: {exc}") from exc
    return frames


def sequence_from_json(doc: dict, fps: float = 30.0) -> FrameSequence:
    return FrameSequence(tuple(frames_from_json(doc)), fps)


def frames_to_json(frames) -> dict:
    out = []
    for f in frames:
        tracks = f.track_ids or [None] * len(f.boxes)
        out.append(
            {"id": f.frame_id, "t_ms": f.timestamp, "boxes": [box_to_json(b, t) for b, t in zip(f.boxes, tracks)]}
        )
    return {"frames": out}


def load_json(path: str | Path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def dump_json(doc: Any, path: str | Path) -> None:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")
