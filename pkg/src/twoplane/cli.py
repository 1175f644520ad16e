"""twoplane command line: saliency heatmaps, image warps, box unwarping, streaming runs, VP estimation.

Exit codes: 0 on success, 2 when an input or config fails validation, 1 on
I/O or decode failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pydantic
from PIL import UnidentifiedImageError

from . import geometry, imageio, saliency, warp
from .cache import CacheStore, cache_get_or_build
from .config import Config, load_config
from .errors import SizeMismatch, TwoPlaneError, ValidationError
from .eval import io as evio
from .eval.stream import (
    FrameSequence,
    LatencyModel,
    MockConfig,
    mock_detect,
    offline_ap,
    pair_predictions,
    simulate_stream,
    streaming_ap,
)
from .geometry import ImageSize

log = logging.getLogger("twoplane")

DEFAULT_CACHE_DIR = ".twoplane-cache"


class UsageError(Exception):
    pass


def _store(args, cfg: Config) -> CacheStore:
    return CacheStore(Path(args.cache_dir or cfg.cache_dir or DEFAULT_CACHE_DIR))


def _endpoint_rescale(args, cfg: Config) -> bool:
    return cfg.endpoint_rescale and not args.no_endpoint_rescale


def _image_size(cfg: Config, actual: ImageSize | None = None) -> ImageSize:
    if cfg.image_size is None:
        if actual is None:
            raise ValidationError("image_size must be set in the config for this command")
        return actual
    size = ImageSize(*cfg.image_size)
    if actual is not None and actual != size:
        raise SizeMismatch(f"config image_size {size.w}x{size.h} but input is {actual.w}x{actual.h}")
    return size


def warp_field_for(cfg: Config, size: ImageSize, store: CacheStore, endpoint_rescale: bool = True,
                   frame_index: int = 0, scale: float | None = None) -> warp.WarpField:
    smap = cache_get_or_build(store, cfg.params(size, frame_index), size, cfg.grid_size())
    out = size.scaled(cfg.scale if scale is None else scale)
    return warp.build_warp(smap, out, cfg.sigma_frac(), endpoint_rescale)


# -- commands -------------------------------------------------------------------

def cmd_saliency(args, cfg: Config) -> int:
    size = _image_size(cfg, ImageSize(*args.size) if args.size else None)
    store = _store(args, cfg)
    smap = cache_get_or_build(store, cfg.params(size), size, cfg.grid_size())
    imageio.write_heatmap(smap.grid, args.out)
    print(smap.param_hash.hex())
    return 0


def cmd_warp(args, cfg: Config) -> int:
    img = imageio.read_png(args.image_in)
    size = _image_size(cfg, img.size)
    scale = cfg.scale if args.scale is None else args.scale
    if not 0 < scale <= 1:
        raise ValidationError(f"scale must be in (0, 1], got {scale}")
    out_size = size.scaled(scale)
    if args.uniform:
        smap = saliency.uniform_saliency(size, cfg.grid_size())
        wf = warp.build_warp(smap, out_size, cfg.sigma_frac(), _endpoint_rescale(args, cfg))
    else:
        wf = warp_field_for(cfg, size, _store(args, cfg), _endpoint_rescale(args, cfg), scale=scale)
    imageio.write_png(warp.warp_image(img, wf, workers=args.threads), args.image_out)
    if args.field_out:
        evio.dump_json(wf.to_json(), args.field_out)
    return 0


def _map_detections(args, forward: bool) -> int:
    wf = warp.WarpField.from_json(evio.load_json(args.field))
    frames = evio.frames_from_json(evio.load_json(args.dets_in))
    mapper = warp.warp_boxes if forward else warp.unwarp_boxes
    out = []
    for f in frames:
        mapped = mapper(list(f.boxes), wf, clip=args.clip)
        out.append(type(f)(f.frame_id, f.timestamp, tuple(mapped), f.track_ids))
    evio.dump_json(evio.frames_to_json(out), args.dets_out)
    return 0


def cmd_unwarp(args, cfg: Config) -> int:
    return _map_detections(args, forward=False)


def cmd_warp_boxes(args, cfg: Config) -> int:
    return _map_detections(args, forward=True)


def run_stream(cfg: Config, doc: dict, store: CacheStore | None = None, endpoint_rescale: bool = True) -> dict:
    """Simulate the configured detector over a ground-truth document and build the report."""
    s = cfg.stream
    seq = FrameSequence(tuple(evio.frames_from_json(doc)), s.fps)
    latency = LatencyModel(s.latency.kind, s.latency.mean, s.latency.std,
                           s.seed if s.latency.seed is None else s.latency.seed)
    mock_cfg = MockConfig(s.detector.jitter_px, s.detector.drop_small_prob, s.detector.score_noise)
    index = {f.frame_id: k for k, f in enumerate(seq.frames)}
    fields: dict[int, warp.WarpField] = {}

    def field_for(k: int) -> warp.WarpField | None:
        if not s.use_warp:
            return None
        refresh = k - k % cfg.n_v  # VP and saliency are refreshed every n_v frames
        if refresh not in fields:
            fields[refresh] = warp_field_for(cfg, _image_size(cfg), store, endpoint_rescale, refresh)
        return fields[refresh]

    def detector(frame):
        return mock_detect(frame, mock_cfg, s.seed, field_for(index[frame.frame_id]))

    timeline = simulate_stream(seq, detector, latency)
    pairs = pair_predictions(timeline, seq)
    return {
        "sap": streaming_ap(timeline, seq).to_json(),
        "offline_ap": offline_ap(seq, detector).to_json(),
        "throughput_fps": timeline.throughput_fps(),
        "timeline": timeline.summary(),
        "pairing": [None if p is None else timeline.events[p].source_frame_id for p in pairs],
        "settings": {
            "fps": s.fps,
            "latency": {"kind": latency.kind.value, "mean": latency.mean, "std": latency.std, "seed": latency.seed},
            "seed": s.seed,
            "use_warp": s.use_warp,
        },
    }


def cmd_stream(args, cfg: Config) -> int:
    doc = evio.load_json(args.gts)
    store = _store(args, cfg) if cfg.stream.use_warp else None
    report = run_stream(cfg, doc, store, _endpoint_rescale(args, cfg))
    evio.dump_json(report, args.report_out)
    return 0


def cmd_vp(args, cfg: Config) -> int:
    lines = geometry.parse_lines(evio.load_json(args.lines))
    vp = geometry.vp_from_lines(lines)
    doc = {"vp": [vp.x, vp.y]}
    if args.out:
        evio.dump_json(doc, args.out)
    else:
        print(json.dumps(doc))
    return 0


# -- wiring ---------------------------------------------------------------------

def _size_arg(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twoplane", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON config file (version 1)")
    p.add_argument("--seed", type=int, help="override stream.seed")
    p.add_argument("--cache-dir", help="saliency cache directory")
    p.add_argument("--no-endpoint-rescale", action="store_true",
                   help="keep the raw kernel axis maps instead of stretching them to the image edges")
    p.add_argument("--threads", type=int, default=1, help="worker threads for image resampling")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("saliency", help="write a saliency heatmap PNG and cache entry")
    s.add_argument("out")
    s.add_argument("--size", type=_size_arg, help="image size WxH when the config has none")
    s.set_defaults(func=cmd_saliency)

    s = sub.add_parser("warp", help="warp a PNG with the configured prior")
    s.add_argument("image_in")
    s.add_argument("image_out")
    s.add_argument("--field-out", help="also write the warp field JSON")
    s.add_argument("--scale", type=float, help="override the config scale factor")
    s.add_argument("--uniform", action="store_true", help="use constant saliency (plain resize)")
    s.set_defaults(func=cmd_warp)

    for name, func, text in (
        ("unwarp", cmd_unwarp, "map detections from warped to original coordinates"),
        ("warp-boxes", cmd_warp_boxes, "map detections from original to warped coordinates"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("field")
        s.add_argument("dets_in")
        s.add_argument("dets_out")
        s.add_argument("--clip", action="store_true", help="clip boxes to the source coordinate range first")
        s.set_defaults(func=func)

    s = sub.add_parser("stream", help="simulate streaming detection and report sAP")
    s.add_argument("gts")
    s.add_argument("report_out")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("vp", help="vanishing point from annotated lines")
    s.add_argument("lines")
    s.add_argument("--out")
    s.set_defaults(func=cmd_vp)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"stream": cfg.stream.model_copy(update={"seed": args.seed})})
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        return args.func(args, cfg)
    except pydantic.ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "config"
            print(f"twoplane: invalid config at {loc}: {err['msg']}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"twoplane: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except (TwoPlaneError, ValueError) as exc:
        if isinstance(exc, ValidationError) or not isinstance(exc, TwoPlaneError):
            print(f"twoplane: {exc}", file=sys.stderr)
            return 2
        print(f"twoplane: {exc}", file=sys.stderr)
        return 1
    except (OSError, UnidentifiedImageError) as exc:
        print(f"twoplane: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
