"""Finite-difference probes of how warp outputs respond to the prior's parameters.

These do not train anything. They check that the map from parameters to
saliency and axis maps is smooth enough to be learned by gradient descent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import geometry, saliency, warp
from .errors import ClampBoundary, ValidationError
from .geometry import ImageSize, Point2
from .saliency import WarpParams

PARAM_IDS = (
    "nu", "nu_hat", "lambda",
    "theta1", "theta2", "theta3", "theta4",
    "alpha1", "alpha2", "alpha3", "alpha4",
    "vx", "vy", "kernel_sigma_frac",
)

_INTERVALS = {
    "nu": (1.0, math.inf),
    "nu_hat": (1.0, math.inf),
    "lambda": (0.0, math.inf),
    "kernel_sigma_frac": (0.0, 0.5),
    "vx": (-math.inf, math.inf),
    "vy": (-math.inf, math.inf),
    **{f"theta{i}": (geometry.THETA_MIN, geometry.THETA_MAX) for i in range(1, 5)},
    **{f"alpha{i}": (0.0, 1.0) for i in range(1, 5)},
}


class Objective(str, enum.Enum):
    SUM_TX = "sum_tx"
    SUM_S = "sum_s"
    WARP_L2 = "warp_l2"


@dataclass(frozen=True)
class ProbeSetup:
    size: ImageSize = ImageSize(1920, 1200)
    grid: ImageSize = saliency.DEFAULT_GRID
    scale: float = 0.5
    image: warp.Image | None = None
    reference: warp.Image | None = None


def get_param(params: WarpParams, param_id: str) -> float:
    if param_id == "lambda":
        return params.lam
    if param_id in ("vx", "vy"):
        return params.v.x if param_id == "vx" else params.v.y
    if param_id.startswith("theta"):
        return params.theta[int(param_id[-1]) - 1]
    if param_id.startswith("alpha"):
        return params.alpha[int(param_id[-1]) - 1]
    return getattr(params, param_id)


def with_param(params: WarpParams, param_id: str, value: float) -> WarpParams:
    if param_id not in PARAM_IDS:
        raise ValidationError(f"unknown parameter {param_id!r}; expected one of {PARAM_IDS}")
    if param_id == "lambda":
        return params.replace(lam=value)
    if param_id == "vx":
        return params.replace(v=Point2(value, params.v.y))
    if param_id == "vy":
        return params.replace(v=Point2(params.v.x, value))
    if param_id[:-1] in ("theta", "alpha"):
        name, i = param_id[:-1], int(param_id[-1]) - 1
        vals = list(getattr(params, name))
        vals[i] = value
        return params.replace(**{name: tuple(vals)})
    return params.replace(**{param_id: value})


def objective_fn(objective: Objective | str, setup: ProbeSetup) -> Callable[[WarpParams], float]:
    objective = Objective(objective)
    out_size = setup.size.scaled(setup.scale)

    if objective is Objective.SUM_S:
        return lambda p: float(saliency.two_plane_saliency(p, setup.size, setup.grid).grid.sum())

    def field(p: WarpParams) -> warp.WarpField:
        S = saliency.two_plane_saliency(p, setup.size, setup.grid)
        return warp.build_warp(S, out_size, p.kernel_sigma_frac)

    if objective is Objective.SUM_TX:
        return lambda p: float(field(p).tx.values.sum())

    if setup.image is None or setup.reference is None:
        raise ValidationError("warp_l2 needs both an image and a reference image")

    def l2(p: WarpParams) -> float:
        out = warp.warp_image(setup.image, field(p)).data.astype(np.float64)
        return float(np.sum((out - setup.reference.data) ** 2))

    return l2


def param_sensitivity(
    params: WarpParams,
    objective: Objective | str,
    param_id: str,
    step: float,
    setup: ProbeSetup = ProbeSetup(),
) -> tuple[float, float]:
    """Central differences at step and step / 2.

    Returns (gradient at step / 2, relative gap between the two estimates).
    """
    if not 1e-6 <= step <= 1e-2:
        raise ValidationError(f"step must be in [1e-6, 1e-2], got {step}")
    x = get_param(params, param_id)
    lo, hi = _INTERVALS[param_id]
    if x - lo < 2 * step or hi - x < 2 * step:
        raise ClampBoundary(f"{param_id}={x} is within 2*step of its interval [{lo}, {hi}]")

    f = objective_fn(objective, setup)

    def central(h: float) -> float:
        return (f(with_param(params, param_id, x + h)) - f(with_param(params, param_id, x - h))) / (2 * h)

    g_h = central(step)
    g_half = central(step / 2)
    gap = abs(g_h - g_half) / max(abs(g_half), 1e-8)
    return g_half, gap
