"""Two-plane perspective prior: geometry-driven saliency warps and a streaming evaluation harness."""

from .errors import TwoPlaneError
from .geometry import (
    Homography,
    ImageSize,
    LineSegment,
    PlaneKind,
    PlaneQuad,
    Point2,
    apply_homography,
    homography_from_quad,
    plane_quad,
    vp_from_lines,
)
from .saliency import (
    MultiVpConfig,
    SaliencyMap,
    WarpParams,
    bev_profile,
    multi_vp_saliency,
    plane_saliency,
    two_plane_saliency,
)
from .warp import (
    AxisMap,
    Box,
    Image,
    WarpField,
    build_warp,
    inverse_axis_map,
    marginalize,
    unwarp_boxes,
    unwarp_points,
    warp_boxes,
    warp_image,
    warp_points,
)

__version__ = "0.1.0"
