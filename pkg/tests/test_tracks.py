import math

import pytest

from twoplane.errors import DegenerateTrack, TooShort, ValidationError
from twoplane.eval.tracks import (
    average_track_extension, mean_min_object_size, min_object_size_tracked, track_extension,
)
from twoplane.warp import Box


def square(area):
    s = math.sqrt(area)
    return Box(0, 0, s, s)


@pytest.mark.parametrize("args, expected", [((90, 90, 200), 0.0), ((150, 0, 150), 1.0), ((120, 90, 150), 0.2)])
def test_track_extension(args, expected):
    assert track_extension(*args) == pytest.approx(expected, abs=1e-12)


def test_too_short():
    with pytest.raises(TooShort):
        track_extension(10, 5, 149)


def test_lengths_in_range():
    with pytest.raises(ValidationError):
        track_extension(200, 0, 150)


def test_average_skips_short_tracks():
    tracks = [(120, 90, 150), (300, 0, 300), (10, 0, 20)]
    assert average_track_extension(tracks) == pytest.approx((0.2 + 1.0) / 2)
    assert average_track_extension(tracks, "length") == pytest.approx((0.2 * 150 + 300) / 450)
    assert math.isnan(average_track_extension([(1, 0, 2)]))
    with pytest.raises(ValidationError):
        average_track_extension(tracks, "median")


def test_min_object_size():
    track = [square(100), square(400), square(10000)]
    assert min_object_size_tracked(track, square(100)) == 0.0
    assert min_object_size_tracked(track, square(10000)) == 1.0
    got = min_object_size_tracked([square(100), square(10000)], square(1000))
    assert got == pytest.approx(0.5, abs=1e-12)


def test_degenerate_track():
    with pytest.raises(DegenerateTrack):
        min_object_size_tracked([square(100), square(100)], square(100))
    with pytest.raises(ValidationError):
        min_object_size_tracked([], square(1))


def test_mean_min_object_size():
    assert mean_min_object_size([0.2, 0.4]) == pytest.approx(0.3)
    assert math.isnan(mean_min_object_size([]))
