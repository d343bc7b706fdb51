"""Command line entry point: ``seglink detect | synth | bench``.

Exit status is 0 on success, 1 for unusable input (missing or undecodable
image, malformed scene) and 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .io import (
    emit_jsonl,
    load_image,
    render_overlay,
    save_edge_maps,
    save_gradient_planes,
    save_image,
    save_param_fields,
    write_jsonl,
)
from .pipeline import STAGES, ConfigError, DetectorConfig, ImageError, benchmark, detect, get_lut
from .synth import SceneError, generate_synthetic

log = logging.getLogger("seglink")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2

# CLI flag -> DetectorConfig field
_FLAG_FIELDS = {
    "directions": "N",
    "samples": "M",
    "gap": "d",
    "ctx_threshold": "C",
    "local_threshold": "L",
    "tolerance": "tolerance",
    "min_length": "min_length",
    "threads": "threads",
}

_BORDER_NOTE = (
    "Pixels whose forward M-pixel window or neighbouring sample windows leave "
    "the image are never marked, so no segment starts within about M+1 pixels "
    "of the border along its scan direction."
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector settings (override --config)")
    g.add_argument("--config", type=Path, help="JSON file with DetectorConfig fields")
    g.add_argument("--directions", type=int, metavar="N", help="number of scan directions (32)")
    g.add_argument("--samples", type=int, metavar="M", help="samples per window (15)")
    g.add_argument("--gap", type=int, metavar="D", help="largest bridged gap in pixels (5)")
    g.add_argument("--ctx-threshold", type=float, metavar="C", help="TV distance threshold (0.7)")
    g.add_argument("--local-threshold", type=float, metavar="L",
                   help="minimum gradient threshold in gray levels (3)")
    g.add_argument("--tolerance", type=float, metavar="DEG",
                   help="allowed angle between the two limit lines (180/N)")
    g.add_argument("--threads", type=int, metavar="K", help="worker threads (all cores)")


def build_config(args) -> DetectorConfig:
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None) is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        values.update(loaded)
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if getattr(args, "no_dedup", False):
        values["dedup"] = False
    return DetectorConfig.from_mapping(values)


def _cmd_detect(args) -> int:
    config = build_config(args)
    image = load_image(args.input)
    keep = args.dump_edges is not None
    result = detect(image, config, keep_edges=keep)
    if args.out is None:
        sys.stdout.write(emit_jsonl(result))
    else:
        write_jsonl(result, args.out)
    if args.overlay is not None:
        svg = render_overlay(image, result, style=args.overlay_style,
                             min_length=args.overlay_min_length)
        Path(args.overlay).write_text(svg, encoding="utf-8")
    if keep:
        save_edge_maps(result.edges, args.dump_edges)
    if args.dump_params is not None:
        save_param_fields(image, config, args.dump_params)
    if args.dump_gradients is not None:
        save_gradient_planes(image, args.dump_gradients)
    if args.dump_lut is not None:
        get_lut(config.lut_mu_max, config.lut_sigma_max, config.lut_step).to_csv(args.dump_lut)
    t = result.timing
    log.info("%s: %d rectangles in %.2fs (%s)", args.input, len(result.rectangles), t["total"],
             ", ".join(f"{s} {t[s]:.2f}s" for s in STAGES))
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneError(f"{args.spec}: invalid JSON ({exc})") from None
    synth = generate_synthetic(spec)
    save_image(synth.data, args.out)
    if args.truth is not None:
        Path(args.truth).write_text(json.dumps(synth.truth, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = build_config(args)
    images = {str(p): load_image(p) for p in args.inputs}
    rows = benchmark(images, config, args.reps)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.DictWriter(out, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v)
                             for k, v in row.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seglink", description="Semi-global line segment detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect segments in an 8-bit PNG/PGM image",
                       epilog=_BORDER_NOTE)
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, help="JSONL output (default: stdout)")
    p.add_argument("--overlay", type=Path, help="write an SVG overlay")
    p.add_argument("--overlay-style", choices=("midline", "rect"), default="midline")
    p.add_argument("--overlay-min-length", type=float, default=0.0, metavar="PX",
                   help="draw only rectangles at least this long")
    p.add_argument("--min-length", type=float, metavar="PX",
                   help="drop rectangles shorter than this from the output")
    p.add_argument("--no-dedup", action="store_true",
                   help="keep repeated detections from neighbouring direction bins")
    p.add_argument("--dump-edges", type=Path, metavar="DIR",
                   help="write each direction's signed edge map as a 3-level PNG")
    p.add_argument("--dump-params", type=Path, metavar="DIR",
                   help="write each direction's window mean and variance as float TIFFs")
    p.add_argument("--dump-gradients", type=Path, metavar="DIR",
                   help="write the four derivative planes as float TIFFs")
    p.add_argument("--dump-lut", type=Path, metavar="FILE", help="write the TV table as CSV")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("synth", help="render a synthetic scene from a JSON spec")
    p.add_argument("spec", type=Path)
    p.add_argument("--out", type=Path, required=True, help="image file (.png or .pgm)")
    p.add_argument("--truth", type=Path, help="ground-truth JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="median per-stage timings as CSV")
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out", type=Path, help="CSV output (default: stdout)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    if getattr(args, "reps", 1) < 1:
        print("seglink: error: --reps must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"seglink: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ImageError, SceneError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"seglink: bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
