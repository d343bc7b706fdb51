"""Image files, JSONL result files and SVG overlays."""
from __future__ import annotations

import base64
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np
from PIL import Image

from .directions import directions, scan_params
from .gradients import directional_derivatives
from .pipeline import DetectionResult, DetectorConfig, ImageError
from .rectangles import Rectangle

__all__ = [
    "SCHEMA",
    "SCHEMA_VERSION",
    "GrayImage",
    "load_image",
    "save_image",
    "to_uint8",
    "emit_jsonl",
    "parse_jsonl",
    "write_jsonl",
    "read_jsonl",
    "render_overlay",
    "edge_map_image",
    "save_edge_maps",
    "save_float_image",
    "save_param_fields",
    "save_gradient_planes",
]

SCHEMA = "seglink.rectangles"
SCHEMA_VERSION = 1

# Rec. 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])

_COLORS = {1: "#e8553a", -1: "#2f7fd8"}


@dataclass(frozen=True, eq=False)
class GrayImage:
    data: np.ndarray  # float64 in [0, 255], row 0 at the top
    source: str = ""

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])


def load_image(path) -> GrayImage:
    """Read an 8-bit PNG/PGM (gray, gray+alpha, palette or RGB[A]).

    Colour is reduced with Rec. 601 weights; alpha is ignored.  Images with
    more than 8 bits per sample are rejected rather than silently rescaled.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F") or mode.startswith("I;"):
                raise ImageError(f"{path}: {mode} images are not 8-bit")
            if mode == "1":
                im = im.convert("L")
            elif mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            elif mode in ("CMYK", "YCbCr", "LAB", "HSV"):
                im = im.convert("RGB")
            arr = np.asarray(im)
    except FileNotFoundError:
        raise
    except ImageError:
        raise
    except (OSError, ValueError, Image.DecompressionBombError) as exc:
        raise ImageError(f"{path}: cannot decode image ({exc})") from None
    if arr.dtype != np.uint8:
        raise ImageError(f"{path}: expected 8-bit samples, got {arr.dtype}")
    if arr.ndim == 3:
        if arr.shape[2] in (3, 4):
            gray = arr[..., :3].astype(np.float64) @ _LUMA
        elif arr.shape[2] == 2:  # gray + alpha
            gray = arr[..., 0].astype(np.float64)
        else:
            raise ImageError(f"{path}: unsupported channel count {arr.shape[2]}")
    else:
        gray = arr.astype(np.float64)
    return GrayImage(np.ascontiguousarray(gray), str(path))


def to_uint8(data) -> np.ndarray:
    return np.clip(np.rint(np.asarray(data, dtype=np.float64)), 0, 255).astype(np.uint8)


def save_image(data, path) -> None:
    """Write a gray array as 8-bit PNG or PGM (chosen by suffix)."""
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".pnm") else "PNG"
    Image.fromarray(to_uint8(data)).save(path, format=fmt)


# -- JSONL -------------------------------------------------------------------

def _rect_record(r: Rectangle) -> dict:
    score = r.score if math.isfinite(r.score) else None
    return {"theta_deg": r.theta, "x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1,
            "width_px": r.width, "sign": r.sign, "bin": r.bin, "score": score}


def emit_jsonl(result: DetectionResult) -> str:
    """Header line then one rectangle per line.  Timing is left out on purpose
    so that equal detections serialize to equal bytes."""
    header = {"schema": SCHEMA, "version": SCHEMA_VERSION, "width": result.width,
              "height": result.height, "count": len(result.rectangles)}
    lines = [json.dumps(header, allow_nan=False)]
    lines += [json.dumps(_rect_record(r), allow_nan=False) for r in result.rectangles]
    return "\n".join(lines) + "\n"


def parse_jsonl(text: str) -> DetectionResult:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty result file")
    header = json.loads(lines[0])
    if header.get("schema") != SCHEMA:
        raise ValueError(f"not a {SCHEMA} file")
    if header.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {header.get('version')!r}")
    rects = []
    for ln in lines[1:]:
        rec = json.loads(ln)
        score = rec["score"]
        rects.append(Rectangle(
            theta=float(rec["theta_deg"]), x0=float(rec["x0"]), y0=float(rec["y0"]),
            x1=float(rec["x1"]), y1=float(rec["y1"]), width=float(rec["width_px"]),
            sign=int(rec["sign"]), bin=int(rec["bin"]),
            score=float("nan") if score is None else float(score)))
    if "count" in header and header["count"] != len(rects):
        raise ValueError(f"header announces {header['count']} rectangles, found {len(rects)}")
    return DetectionResult(rects, int(header["width"]), int(header["height"]))


def write_jsonl(result: DetectionResult, path) -> None:
    Path(path).write_text(emit_jsonl(result), encoding="utf-8")


def read_jsonl(path) -> DetectionResult:
    return parse_jsonl(Path(path).read_text(encoding="utf-8"))


# -- SVG overlay -------------------------------------------------------------

def _png_base64(data) -> str:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(data)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _polygon(r: Rectangle) -> str:
    dx, dy = r.x1 - r.x0, r.y1 - r.y0
    length = math.hypot(dx, dy)
    if length > 0:
        ux, uy = dx / length, dy / length
    else:  # raster y points down, so the displayed angle flips sign
        rad = math.radians(r.theta)
        ux, uy = math.cos(rad), -math.sin(rad)
    h = 0.5 * r.width
    nx, ny = -uy * h, ux * h
    pts = [(r.x0 + nx, r.y0 + ny), (r.x1 + nx, r.y1 + ny),
           (r.x1 - nx, r.y1 - ny), (r.x0 - nx, r.y0 - ny)]
    return " ".join(f"{x + 0.5:.3f},{y + 0.5:.3f}" for x, y in pts)


def render_overlay(image, result: DetectionResult, style: str = "midline",
                   min_length: float = 0.0, opacity: float = 0.8) -> str:
    """SVG document with the image as backdrop and one primitive per rectangle.

    ``style`` is ``"midline"`` (a line stroked with the rectangle width) or
    ``"rect"`` (the outline of the four limiting lines).  Positive rectangles
    are drawn in red, negative ones in blue.  SVG pixel ``i`` spans
    ``[i, i + 1]``, so pixel-centre coordinates are shifted by half a pixel.
    """
    if style not in ("midline", "rect"):
        raise ValueError(f"unknown overlay style {style!r}")
    w, h = result.width, result.height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
    ]
    if image is not None:
        data = getattr(image, "data", image)
        parts.append(f'<image x="0" y="0" width="{w}" height="{h}" '
                      f'style="image-rendering:pixelated" '
                      f'xlink:href="data:image/png;base64,{_png_base64(data)}"/>')
    parts.append(f'<g fill="none" stroke-opacity="{opacity}">')
    for r in result.rectangles:
        if r.length < min_length:
            continue
        color = _COLORS.get(r.sign, "#888888")
        title = quoteattr(f"theta={r.theta:.2f} bin={r.bin} sign={r.sign:+d}")
        if style == "midline":
            parts.append(
                f'<line x1="{r.x0 + 0.5:.3f}" y1="{r.y0 + 0.5:.3f}" '
                f'x2="{r.x1 + 0.5:.3f}" y2="{r.y1 + 0.5:.3f}" stroke="{color}" '
                f'stroke-width="{r.width:.3f}" data-info={title}/>')
        else:
            parts.append(f'<polygon points="{_polygon(r)}" stroke="{color}" '
                         f'stroke-width="0.5" data-info={title}/>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- debug dumps -------------------------------------------------------------

def edge_map_image(values) -> np.ndarray:
    """Three gray levels: -1 -> 0, 0 -> 128, +1 -> 255."""
    v = np.asarray(values)
    out = np.full(v.shape, 128, dtype=np.uint8)
    out[v < 0] = 0
    out[v > 0] = 255
    return out


def save_edge_maps(edges, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for e in edges:
        p = directory / f"edges_{e.direction.index:02d}_{e.direction.theta:07.3f}.png"
        Image.fromarray(edge_map_image(e.values)).save(p)
        paths.append(p)
    return paths


def save_float_image(plane, path) -> None:
    """Write one plane as a 32-bit float TIFF; NaN marks undefined pixels."""
    Image.fromarray(np.asarray(plane, dtype=np.float32)).save(path, format="TIFF")


def _internal(image) -> np.ndarray:
    # Detector frame: rows flipped so that y points up.
    return np.ascontiguousarray(np.asarray(getattr(image, "data", image), dtype=np.float64)[::-1])


def save_param_fields(image, config: DetectorConfig, directory) -> list[Path]:
    """Per-direction window mean and variance planes, in raster row order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img = _internal(image)
    paths = []
    for d in directions(config.N):
        field = scan_params(img, d, config.M)
        stem = f"params_{d.index:02d}_{d.theta:07.3f}"
        for name, plane in (("mean", field.mu), ("var", field.sigma2)):
            p = directory / f"{stem}_{name}.tiff"
            save_float_image(plane[::-1], p)
            paths.append(p)
    return paths


def save_gradient_planes(image, directory) -> list[Path]:
    """The four directional derivative planes, in raster row order.

    Signs follow the detector's y-up convention, so the 0, 45 and 135 degree
    planes point towards the top of the displayed image.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grads = directional_derivatives(_internal(image))
    paths = []
    for quadrant in (0, 45, 90, 135):
        p = directory / f"gradient_{quadrant:03d}.tiff"
        save_float_image(grads[quadrant][::-1], p)
        paths.append(p)
    return paths
