"""Versioned JSON configuration. Unknown keys are rejected at every level."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ValidationError as TwoPlaneValidationError
from .geometry import ImageSize, Point2
from .saliency import MultiVpConfig, WarpParams

CONFIG_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class WarpSection(_Strict):
    v: Optional[tuple[float, float]] = None
    theta: tuple[float, float, float, float] = (0.15, 0.15, 0.15, 0.15)
    alpha: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    nu: float = 2.0
    nu_hat: float = 2.0
    lam: float = Field(0.3, alias="lambda")
    kernel_sigma_frac: float = 0.06

    @model_validator(mode="after")
    def _check(self):
        # WarpParams owns the bounds; surface its messages unchanged
        try:
            self.to_params(ImageSize(2, 2))
        except TwoPlaneValidationError as exc:
            raise ValueError(str(exc)) from None
        return self

    def to_params(self, size: ImageSize, v: Point2 | None = None) -> WarpParams:
        if v is None:
            v = Point2(*self.v) if self.v is not None else Point2(size.w / 2, size.h / 2)
        return WarpParams(
            v=v, theta=self.theta, alpha=self.alpha, nu=self.nu, nu_hat=self.nu_hat,
            lam=self.lam, kernel_sigma_frac=self.kernel_sigma_frac,
        )


class MultiVpEntry(_Strict):
    warp: WarpSection
    weight: Optional[float] = None


class LatencySection(_Strict):
    kind: Literal["constant", "gaussian"] = "constant"
    mean: float = Field(0.0, ge=0)
    std: float = Field(0.0, ge=0)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)


class DetectorSection(_Strict):
    jitter_px: float = Field(0.0, ge=0)
    drop_small_prob: float = Field(0.0, ge=0, le=1)
    score_noise: float = Field(0.0, ge=0)


class StreamSection(_Strict):
    fps: float = Field(30.0, gt=0)
    latency: LatencySection = LatencySection()
    detector: DetectorSection = DetectorSection()
    seed: int = Field(0, ge=0, lt=2**64)
    use_warp: bool = False


class Config(_Strict):
    version: Literal[1] = CONFIG_VERSION
    image_size: Optional[tuple[int, int]] = None
    scale: float = Field(0.5, gt=0, le=1)
    grid: tuple[int, int] = (96, 60)
    warp: WarpSection = WarpSection()
    multi_vp: Optional[list[MultiVpEntry]] = None
    vp_mode: Literal["fixed", "mean", "per_frame"] = "fixed"
    vp_list: Optional[list[tuple[float, float]]] = None
    endpoint_rescale: bool = True
    cache_dir: Optional[str] = None
    n_v: int = Field(30, ge=1)
    stream: StreamSection = StreamSection()

    @field_validator("grid")
    @classmethod
    def _grid_min(cls, v):
        if v[0] < 8 or v[1] < 8:
            raise ValueError(f"grid must be at least 8x8, got {v[0]}x{v[1]}")
        return v

    @field_validator("image_size")
    @classmethod
    def _size_min(cls, v):
        if v is not None and (v[0] < 2 or v[1] < 2):
            raise ValueError(f"image_size must be at least 2x2, got {v[0]}x{v[1]}")
        return v

    @model_validator(mode="after")
    def _vp_consistency(self):
        if self.vp_mode in ("mean", "per_frame") and not self.vp_list:
            raise ValueError(f"vp_mode {self.vp_mode!r} needs a non-empty vp_list")
        if self.multi_vp is not None:
            if not self.multi_vp:
                raise ValueError("multi_vp must not be empty")
            weights = [e.weight for e in self.multi_vp if e.weight is not None]
            if any(w < 0 for w in weights):
                raise ValueError("multi_vp weights must be >= 0")
            if len(weights) == len(self.multi_vp) and not sum(weights) > 0:
                raise ValueError("multi_vp weights must not all be zero")
        return self

    # -- derived objects ----------------------------------------------------

    def grid_size(self) -> ImageSize:
        return ImageSize(*self.grid)

    def vp_for_frame(self, frame_index: int = 0) -> Point2 | None:
        """VP under the configured mode; None means the warp section's own v (or the image centre)."""
        if self.vp_mode == "mean":
            xs, ys = zip(*self.vp_list)
            return Point2(sum(xs) / len(xs), sum(ys) / len(ys))
        if self.vp_mode == "per_frame":
            return Point2(*self.vp_list[frame_index % len(self.vp_list)])
        return None

    def params(self, size: ImageSize, frame_index: int = 0) -> WarpParams | MultiVpConfig:
        if self.multi_vp is not None:
            n = len(self.multi_vp)
            entries = tuple(
                (e.warp.to_params(size), e.weight if e.weight is not None else 1.0 / n)
                for e in self.multi_vp
            )
            return MultiVpConfig(entries)
        return self.warp.to_params(size, self.vp_for_frame(frame_index))

    def sigma_frac(self) -> float:
        if self.multi_vp is not None:
            return self.multi_vp[0].warp.kernel_sigma_frac
        return self.warp.kernel_sigma_frac

    def canonical(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def parse_config(doc: dict) -> Config:
    return Config.model_validate(doc)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    with open(path) as fh:
        return parse_config(json.load(fh))
