import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoplane import geometry as g
from twoplane.errors import AllParallel, AtInfinity, DegenerateQuad, DegenerateSegment
from twoplane.geometry import Homography, ImageSize, LineSegment, PlaneKind, PlaneQuad, Point2

SIZE = ImageSize(1920, 1200)


def seg(a, b):
    return LineSegment(Point2(*a), Point2(*b))


def random_projective(rng):
    while True:
        M = np.eye(3) + rng.normal(0, 0.3, (3, 3))
        M[2, :2] = rng.normal(0, 1e-4, 2)
        if 0.1 <= abs(np.linalg.det(M)) <= 10:
            return M


def project(M, pts):
    hom = np.column_stack([pts, np.ones(len(pts))]) @ M.T
    return hom[:, :2] / hom[:, 2:]


def normalized(M):
    return M / M.flat[np.argmax(np.abs(M))]


class TestTypes:
    def test_point_rejects_nan(self):
        with pytest.raises(ValueError):
            Point2(float("nan"), 0)

    def test_image_size_minimum(self):
        with pytest.raises(ValueError):
            ImageSize(1, 10)

    def test_scaled(self):
        assert SIZE.scaled(0.5) == ImageSize(960, 600)

    def test_segment_too_short(self):
        with pytest.raises(DegenerateSegment):
            seg((1, 1), (1, 1))

    def test_collinear_quad(self):
        pts = (Point2(0, 0), Point2(1, 1), Point2(2, 2), Point2(5, 0))
        with pytest.raises(DegenerateQuad):
            PlaneQuad(pts, PlaneKind.GROUND)

    def test_homography_is_normalized_and_frozen(self):
        H = Homography(np.diag([2.0, 4.0, -8.0]))
        assert H.m.flat[np.argmax(np.abs(H.m))] == 1.0
        with pytest.raises(ValueError):
            H.m[0, 0] = 3


class TestVanishingPoint:
    def test_two_lines_exact(self):
        vp = g.vp_from_lines([seg((0, 0), (2, 2)), seg((0, 2), (2, 0))])
        assert (vp.x, vp.y) == pytest.approx((1, 1), abs=1e-12)

    def test_parallel(self):
        with pytest.raises(AllParallel):
            g.vp_from_lines([seg((0, 0), (1, 0)), seg((0, 5), (1, 5))])

    def test_needs_two(self):
        with pytest.raises(ValueError):
            g.vp_from_lines([seg((0, 0), (1, 0))])

    def test_perturbed_lines(self, rng):
        target = np.array([100.0, 50.0])
        lines, pivots = [], []
        for ang in (0.3, 1.2, 2.4):
            d = np.array([math.cos(ang), math.sin(ang)])
            pivot = target + 200 * d
            # rotate the line by 0.01 rad about a point 200 px from the target
            rot = ang + 0.01
            e = np.array([math.cos(rot), math.sin(rot)])
            lines.append(seg(pivot, pivot - 300 * e))
            pivots.append((pivot, e))
        vp = g.vp_from_lines(lines)
        # oracle: normal equations built directly from the pivots
        A = np.array([[-e[1], e[0]] for _, e in pivots])
        c = np.array([-e[1] * p[0] + e[0] * p[1] for p, e in pivots])
        oracle = np.linalg.solve(A.T @ A, A.T @ c)
        assert np.hypot(vp.x - 100, vp.y - 50) < 3
        assert (vp.x, vp.y) == pytest.approx(tuple(oracle), abs=1e-8)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-500, 2500), st.floats(-500, 1500),
        st.lists(st.floats(0, math.pi), min_size=3, max_size=8, unique=True),
    )
    def test_concurrent_lines(self, x, y, angles):
        angles = sorted(angles)
        if min(b - a for a, b in zip(angles, angles[1:] + [angles[0] + math.pi])) < 0.05:
            return
        lines = [seg((x + 40 * math.cos(a), y + 40 * math.sin(a)),
                     (x - 90 * math.cos(a), y - 90 * math.sin(a))) for a in angles]
        vp = g.vp_from_lines(lines)
        assert math.hypot(vp.x - x, vp.y - y) < 1e-8

    def test_parse_lines(self):
        lines = g.parse_lines({"lines": [[[0, 0], [2, 2]], [[0, 2], [2, 0]]]})
        assert len(lines) == 2 and lines[1].b == Point2(2, 0)


class TestPlaneQuad:
    v = Point2(960, 600)

    def test_flat_theta_full_alpha(self):
        q = g.plane_quad(self.v, 0, 0, 1, 1, PlaneKind.GROUND, SIZE)
        assert q.corners[2] == Point2(0, 600)

    def test_zero_alpha_is_vp(self):
        # two far corners at v would be degenerate, so only one alpha is 0
        q = g.plane_quad(self.v, 0.7, 0.2, 0, 0.5, PlaneKind.GROUND, SIZE)
        assert q.corners[2] == self.v

    def test_quarter_pi(self):
        left, _ = g.edge_points(self.v, math.pi / 4, 0.1, PlaneKind.GROUND, SIZE)
        assert (left.x, left.y) == pytest.approx((0, 1560))
        q = g.plane_quad(self.v, math.pi / 4, 0.1, 0.5, 0.5, PlaneKind.GROUND, SIZE)
        assert (q.corners[2].x, q.corners[2].y) == pytest.approx((480, 1080))

    def test_near_corners(self):
        ground = g.plane_quad(self.v, 0.15, 0.15, 0.5, 0.5, PlaneKind.GROUND, SIZE)
        top = g.plane_quad(self.v, 0.15, 0.15, 0.5, 0.5, PlaneKind.TOP, SIZE)
        assert ground.corners[:2] == (Point2(0, 1200), Point2(1920, 1200))
        assert top.corners[:2] == (Point2(0, 0), Point2(1920, 0))

    def test_top_goes_up(self):
        top = g.plane_quad(self.v, 0.3, 0.3, 1, 1, PlaneKind.TOP, SIZE)
        assert top.corners[2].y == pytest.approx(600 - 960 * math.tan(0.3))

    def test_clamps(self):
        q = g.plane_quad(self.v, 5.0, -5.0, 2.0, -1.0, PlaneKind.GROUND, SIZE)
        assert q.corners[3] == self.v  # alpha clamped to 0
        assert math.isfinite(q.corners[2].y)

    def test_corners_may_leave_image(self):
        q = g.plane_quad(self.v, 1.2, 1.2, 1, 1, PlaneKind.GROUND, SIZE)
        assert q.corners[2].y > SIZE.h

    def test_continuity(self, rng):
        eps = 1e-7
        bound = 10 * eps * max(SIZE.w, SIZE.h)
        for _ in range(200):
            args = [rng.uniform(600, 1300), rng.uniform(400, 800),
                    *rng.uniform(-1.2, 1.2, 2), *rng.uniform(0.05, 0.95, 2)]
            base = g.plane_quad(Point2(*args[:2]), *args[2:], PlaneKind.GROUND, SIZE).as_array()
            for i in range(6):
                bumped = list(args)
                bumped[i] += eps
                q = g.plane_quad(Point2(*bumped[:2]), *bumped[2:], PlaneKind.GROUND, SIZE).as_array()
                assert np.max(np.abs(q - base)) <= bound


class TestHomography:
    def test_identity(self):
        H = g.homography_from_quad(PlaneQuad.rectangle(SIZE), SIZE)
        np.testing.assert_allclose(H.m, np.eye(3), atol=1e-12)

    def test_scaling(self):
        big = ImageSize(2 * SIZE.w, 2 * SIZE.h)
        H = g.homography_from_quad(PlaneQuad.rectangle(big), SIZE)
        np.testing.assert_allclose(H.m, np.diag([0.5, 0.5, 1.0]), atol=1e-12)

    def test_random_projective(self, rng):
        rect = PlaneQuad.rectangle(SIZE).as_array()
        for _ in range(200):
            M = random_projective(rng)
            src = project(M, rect)
            H = g.homography_from_quad(PlaneQuad(tuple(Point2(*p) for p in src)), SIZE)
            expected = normalized(np.linalg.inv(M))
            assert np.max(np.abs(H.m - expected)) < 1e-6
            mid = project(M, np.array([[SIZE.w / 2, SIZE.h / 2]]))[0]
            got = g.apply_homography(H, Point2(*mid))
            assert (got.x, got.y) == pytest.approx((SIZE.w / 2, SIZE.h / 2), abs=1e-6)

    def test_corners_reproduced_for_plane_quads(self, rng):
        target = PlaneQuad.rectangle(SIZE).as_array()
        for kind in PlaneKind:
            for _ in range(50):
                q = g.plane_quad(Point2(*rng.uniform([300, 300], [1600, 900])),
                                 *rng.uniform(0.0, 1.3, 2), *rng.uniform(0.1, 1, 2), kind, SIZE)
                H = g.homography_from_quad(q, SIZE)
                np.testing.assert_allclose(g.apply_homography_array(H, q.as_array()), target, atol=1e-6)

    def test_inverse_round_trip(self, rng):
        q = g.plane_quad(Point2(900, 580), 0.2, 0.3, 0.6, 0.4, PlaneKind.GROUND, SIZE)
        H = g.homography_from_quad(q, SIZE)
        pts = rng.uniform([0, 0], [SIZE.w, SIZE.h], (1000, 2))
        back = g.apply_homography_array(H, g.apply_homography_array(H.inverse(), pts))
        assert np.max(np.abs(back - pts)) < 1e-8

    def test_simple_application(self):
        assert g.apply_homography(Homography(np.eye(3)), Point2(5, 7)) == Point2(5, 7)
        H = Homography(np.diag([2.0, 2.0, 1.0]))
        assert g.apply_homography(H, Point2(3, 4)) == Point2(6, 8)

    def test_at_infinity(self):
        H = Homography(np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, 1]]))
        with pytest.raises(AtInfinity):
            g.apply_homography(H, Point2(-1, 3))

    def test_dlt_overdetermined(self, rng):
        M = random_projective(rng)
        src = rng.uniform(0, 1000, (12, 2))
        np.testing.assert_allclose(normalized(g.dlt(src, project(M, src))), normalized(M), atol=1e-9)

    def test_dlt_collinear_source(self):
        src = np.array([[0, 0], [1, 1], [2, 2], [3, 3.0]])
        with pytest.raises(DegenerateQuad):
            g.dlt(src, PlaneQuad.rectangle(SIZE).as_array())
