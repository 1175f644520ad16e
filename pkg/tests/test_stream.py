from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ap_by_enumeration, hand_schedule, pair_linear
from twoplane.errors import ValidationError
from twoplane.eval.metrics import COCO_AREAS, COCO_IOUS, coco_ap
from twoplane.eval.stream import (
    FrameSequence, GroundTruthFrame, LatencyModel, MockConfig, MockDetector, StreamTimeline,
    mock_detect, offline_ap, pair_predictions, simulate_stream, streaming_ap,
)
from twoplane.warp import Box


def perfect(frame):
    return list(frame.boxes)


def translating(n, step=5.0, fps=30.0):
    return FrameSequence.from_boxes([[Box(100 + step * k, 200, 160 + step * k, 260)] for k in range(n)], fps)


def static(n, fps=30.0):
    return FrameSequence.from_boxes([[Box(100, 200, 160, 260)] for _ in range(n)], fps)


@pytest.mark.parametrize("latency_ms, latency_thirds", [(40, 120), (0, 0), (100, 300), (20, 60)])
def test_constant_schedule_matches_hand_schedule(latency_ms, latency_thirds):
    seq = static(60)
    tl = simulate_stream(seq, perfect, LatencyModel("constant", latency_ms))
    order, emits = hand_schedule(60, 100, latency_thirds)
    assert tl.processed_frames == order
    assert [e.emit_time * 3 for e in tl.events] == emits


def test_forty_ms_schedule_start():
    tl = simulate_stream(static(20), perfect, LatencyModel("constant", 40))
    assert tl.processed_frames[:8] == [0, 1, 2, 3, 4, 6, 7, 8]
    assert tl.emit_times[:5] == [40, 80, 120, 160, 200]


def test_schedule_invariants():
    seq = static(200)
    tl = simulate_stream(seq, perfect, LatencyModel("gaussian", 105, 8.5, seed=3))
    frames = tl.processed_frames
    assert frames == sorted(set(frames)) and frames[-1] == 199
    for e in tl.events:
        k = e.source_frame_id
        assert seq.arrival(k) <= e.start_time < e.emit_time
        assert e.start_time == 0 or e.start_time >= seq.arrival(k)
    for a, b in zip(tl.events, tl.events[1:]):
        assert b.start_time == max(a.emit_time, seq.arrival(b.source_frame_id))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gaussian_throughput(seed):
    tl = simulate_stream(static(300), perfect, LatencyModel("gaussian", 105, 8.5, seed=seed))
    assert 8.6 <= tl.throughput_fps() <= 10.5


def test_determinism():
    a = simulate_stream(static(100), perfect, LatencyModel("gaussian", 105, 8.5, seed=9))
    b = simulate_stream(static(100), perfect, LatencyModel("gaussian", 105, 8.5, seed=9))
    c = simulate_stream(static(100), perfect, LatencyModel("gaussian", 105, 8.5, seed=10))
    assert a == b
    assert a.emit_times != c.emit_times


def test_latency_model():
    m = LatencyModel("gaussian", 0.0, 50.0, seed=1)
    draws = [m.sample(k) for k in range(200)]
    assert min(draws) >= 0.1 and draws.count(0.1) > 50
    # keyed by frame id, not by call order
    assert m.sample(17) == draws[17]
    assert LatencyModel("constant", 40).sample(5) == 40.0
    with pytest.raises(ValidationError):
        LatencyModel("constant", -1)
    with pytest.raises(ValueError):
        LatencyModel("uniform", 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 3000), min_size=0, max_size=40), st.integers(1, 90))
def test_pairing_matches_linear_scan(raw, n):
    emits = sorted(raw)
    seq = static(n)
    tl = StreamTimeline([
        type_event(Fraction(e), 0) for e in emits
    ])
    got = pair_predictions(tl, seq)
    want = pair_linear([Fraction(e) for e in emits], [seq.arrival(k) for k in range(n)])
    # equal emit times are interchangeable; compare the times they point at
    times = [Fraction(e) for e in emits]
    assert [None if i is None else times[i] for i in got] == [None if i is None else times[i] for i in want]
    for k, i in enumerate(got):
        if i is not None:
            assert times[i] < seq.arrival(k)
            assert i == len(times) - 1 or times[i + 1] >= seq.arrival(k)


def type_event(t, frame_id):
    from twoplane.eval.stream import StreamEvent
    return StreamEvent(t, frame_id, t, ())


def test_emission_at_arrival_is_not_used():
    seq = static(10, fps=25.0)  # period 40 ms
    tl = simulate_stream(seq, perfect, LatencyModel("constant", 40))
    pairs = pair_predictions(tl, seq)
    assert pairs[0] is None and pairs[1] is None  # frame 0 result lands exactly at 40 ms
    assert tl.events[pairs[2]].source_frame_id == 0


def test_zero_latency_static_scene():
    seq = static(300)
    tl = simulate_stream(seq, perfect, LatencyModel("constant", 0))
    assert tl.processed_frames == list(range(300))
    # frame 0 has nothing emitted before it; recall tops out at 299/300
    assert streaming_ap(tl, seq).ap50 == pytest.approx(100 / 101, abs=1e-12)
    tail = FrameSequence(seq.frames[1:], seq.fps)
    pairs = pair_predictions(tl, seq)[1:]
    dets = [list(tl.events[i].predictions) for i in pairs]
    assert coco_ap(dets, tail.frames).ap == 1.0


def test_sap_matches_oracle_pairing():
    seq = translating(60)
    tl = simulate_stream(seq, perfect, LatencyModel("constant", 40))
    times = tl.emit_times
    idx = pair_linear(times, [float(seq.arrival(k)) for k in range(len(seq))])
    # make scores distinct for the enumeration oracle
    dets = []
    for k, i in enumerate(idx):
        if i is None:
            dets.append([])
        else:
            dets.append([Box(b.x1, b.y1, b.x2, b.y2, 1.0 - 1e-4 * k, b.class_id) for b in tl.events[i].predictions])
    table = ap_by_enumeration(dets, [f.boxes for f in seq.frames], [0.5], COCO_AREAS["all"], [0])
    got = streaming_ap(tl, seq, iou_thresholds=[0.5]).ap50
    want = float(np.mean(table))
    assert got == pytest.approx(want, abs=1e-12)
    assert 0 < got < 1


def test_sap_bounded_by_offline_and_latency():
    seq = translating(90, step=6.0)
    ap = offline_ap(seq, perfect).ap50
    s40 = streaming_ap(simulate_stream(seq, perfect, LatencyModel("constant", 40)), seq).ap50
    s80 = streaming_ap(simulate_stream(seq, perfect, LatencyModel("constant", 80)), seq).ap50
    assert s80 <= s40 <= ap == 1.0


def test_no_emissions():
    seq = static(5)
    assert streaming_ap(StreamTimeline([]), seq).ap == 0.0
    assert StreamTimeline([]).throughput_fps() == 0.0


def test_frame_sequence_validation():
    with pytest.raises(ValidationError):
        FrameSequence((GroundTruthFrame(0, 0.0), GroundTruthFrame(1, 50.0)), 30.0)
    with pytest.raises(ValidationError):
        FrameSequence((GroundTruthFrame(0, 10.0), GroundTruthFrame(1, 10.0)), 30.0)
    with pytest.raises(ValidationError):
        FrameSequence((), 0.0)
    with pytest.raises(ValidationError):
        GroundTruthFrame(0, 0.0, (Box(0, 0, 1, 1),), (1, 2))
    seq = FrameSequence.from_boxes([[], []], 30.0)
    assert seq.arrival(1) == Fraction(100, 3)


def test_mock_detect():
    gt = GroundTruthFrame(3, 100.0, (Box(0, 0, 10, 10), Box(50, 50, 200, 200)))
    assert mock_detect(gt) == list(gt.boxes)
    dropped = mock_detect(gt, MockConfig(drop_small_prob=1.0))
    assert dropped == [gt.boxes[1]]
    cfg = MockConfig(jitter_px=2.0, score_noise=0.1)
    a, b = mock_detect(gt, cfg, seed=4), mock_detect(gt, cfg, seed=4)
    assert a == b and a != mock_detect(gt, cfg, seed=5)
    assert all(0 <= d.score <= 1 for d in a)
    assert MockDetector(cfg, 4)(gt) == a
    with pytest.raises(ValidationError):
        MockConfig(drop_small_prob=1.5)


def test_mock_detect_through_uniform_warp():
    from twoplane.geometry import ImageSize
    from twoplane.saliency import uniform_saliency
    from twoplane.warp import build_warp

    size = ImageSize(640, 480)
    wf = build_warp(uniform_saliency(size, ImageSize(16, 12)), size.scaled(0.5), 0.06, True)
    gt = GroundTruthFrame(0, 0.0, (Box(100, 100, 300, 260),))
    (d,) = mock_detect(gt, MockConfig(), 0, wf)
    for got, want in zip((d.x1, d.y1, d.x2, d.y2), (100, 100, 300, 260)):
        assert got == pytest.approx(want, abs=1e-6)


def test_coco_ious_used_by_default():
    seq = static(3)
    r = streaming_ap(simulate_stream(seq, perfect, LatencyModel("constant", 0)), seq)
    assert r.ap == r.ap50  # identical boxes: every threshold agrees
    assert len(COCO_IOUS) == 10


def test_mock_detect_drops_boxes_outside_frame():
    from twoplane.geometry import ImageSize
    from twoplane.saliency import uniform_saliency
    from twoplane.warp import build_warp

    size = ImageSize(320, 200)
    wf = build_warp(uniform_saliency(size, ImageSize(16, 10)), size.scaled(0.5), 0.06, True)
    gt = GroundTruthFrame(0, 0.0, (Box(100, 250, 160, 290), Box(10, 10, 50, 50)))
    (d,) = mock_detect(gt, MockConfig(), 0, wf)
    assert d.xyxy == pytest.approx((10, 10, 50, 50), abs=1e-9)
