"""Directory-backed saliency cache for fixed cameras and periodic VP refresh.

File layout (little-endian)::

    magic     8 bytes   b"PPSAL1\\0\\0"
    grid_w    u32
    grid_h    u32
    target_w  u32
    target_h  u32
    hash      32 bytes  param_hash of the producing parameters
    grid      grid_w * grid_h float32, row-major
    crc32     u32 over every preceding byte
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import saliency
from .errors import CacheCorrupt, ValidationError
from .geometry import ImageSize, Point2
from .saliency import MultiVpConfig, SaliencyMap, WarpParams

log = logging.getLogger(__name__)

MAGIC = b"PPSAL1\0\0"
_HEADER = struct.Struct("<8s4I32s")


def encode(smap: SaliencyMap) -> bytes:
    gh, gw = smap.grid.shape
    header = _HEADER.pack(MAGIC, gw, gh, smap.target_size.w, smap.target_size.h, smap.param_hash)
    body = header + np.ascontiguousarray(smap.grid, dtype="<f4").tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def decode(data: bytes) -> SaliencyMap:
    if len(data) < _HEADER.size + 4:
        raise CacheCorrupt(f"cache file too short ({len(data)} bytes)")
    magic, gw, gh, tw, th, digest = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheCorrupt(f"bad magic {magic!r}")
    expected = _HEADER.size + 4 * gw * gh + 4
    if len(data) != expected:
        raise CacheCorrupt(f"cache file has {len(data)} bytes, header implies {expected}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CacheCorrupt("checksum mismatch")
    grid = np.frombuffer(data, dtype="<f4", count=gw * gh, offset=_HEADER.size).reshape(gh, gw)
    try:
        return SaliencyMap(grid.astype(np.float32), ImageSize(tw, th), digest)
    except ValidationError as exc:
        raise CacheCorrupt(f"cache payload invalid: {exc}") from exc


def to_float32(smap: SaliencyMap) -> SaliencyMap:
    """The exact map a cache round trip yields."""
    return SaliencyMap(smap.grid.astype(np.float32), smap.target_size, smap.param_hash)


@dataclass
class CacheStore:
    """Key-value store of saliency maps, one file per param_hash.

    Writes land in a temp file in the same directory and are renamed into place,
    so concurrent readers see either nothing or a complete file.
    """

    root: Path
    hits: int = field(default=0, init=False)
    misses: int = field(default=0, init=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, digest: bytes) -> Path:
        return self.root / f"{digest.hex()}.sal"

    def get(self, digest: bytes) -> SaliencyMap | None:
        path = self.path_for(digest)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            return None
        smap = decode(data)
        if smap.param_hash != digest:
            raise CacheCorrupt(f"{path.name} holds hash {smap.param_hash.hex()}")
        return smap

    def put(self, smap: SaliencyMap) -> Path:
        path = self.path_for(smap.param_hash)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".sal")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode(smap))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path


def cache_get_or_build(
    store: CacheStore,
    params: WarpParams | MultiVpConfig,
    size: ImageSize,
    grid: ImageSize = saliency.DEFAULT_GRID,
) -> SaliencyMap:
    """Return the cached map for these parameters, building and persisting it on a miss.

    Both paths return float32 grids so a hit is bit-identical to the original miss.
    """
    digest = saliency.param_hash(params, size, grid)
    hit = store.get(digest)
    if hit is not None:
        store.hits += 1
        return hit
    store.misses += 1
    smap = to_float32(saliency.build(params, size, grid))
    store.put(smap)
    log.debug("cached saliency %s", digest.hex()[:12])
    return smap


@dataclass
class SaliencyRefresher:
    """Streaming helper: re-key the saliency on a fresh vanishing point every n_v frames.

    `vp_at(frame_index)` supplies the VP estimate when a refresh is due; between
    refreshes the last map is reused unchanged.
    """

    store: CacheStore
    base: WarpParams
    size: ImageSize
    n_v: int = 30
    grid: ImageSize = saliency.DEFAULT_GRID
    _current: SaliencyMap | None = field(default=None, init=False, repr=False)
    _last_refresh: int | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.n_v < 1:
            raise ValidationError(f"n_v must be >= 1, got {self.n_v}")

    def saliency_for(self, frame_index: int, vp_at: Callable[[int], Point2]) -> SaliencyMap:
        due = self._last_refresh is None or frame_index - self._last_refresh >= self.n_v
        if due:
            params = self.base.replace(v=vp_at(frame_index))
            self._current = cache_get_or_build(self.store, params, self.size, self.grid)
            self._last_refresh = frame_index
        return self._current
