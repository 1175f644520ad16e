from .metrics import COCO_AREAS, COCO_IOUS, ApReport, coco_ap, iou, is_absent
from .stream import (
    FrameSequence,
    GroundTruthFrame,
    LatencyKind,
    LatencyModel,
    MockConfig,
    MockDetector,
    StreamEvent,
    StreamTimeline,
    mock_detect,
    offline_ap,
    pair_predictions,
    simulate_stream,
    streaming_ap,
)
from .tracks import (
    average_track_extension,
    mean_min_object_size,
    min_object_size_tracked,
    track_extension,
)
