"""End-to-end detection: configuration, orchestration and benchmarking."""
from __future__ import annotations

import functools
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .directions import Direction, directions, scan_params
from .gradients import directional_derivatives
from .linker import (
    LinkerConfig,
    SignedEdgeMap,
    contextual_field,
    link_direction,
    polarity,
    t_contextual_field,
)
from .rectangles import Rectangle, merge_duplicates, rectangles_from_edges
from .stats import TvLut, build_lut

__all__ = [
    "ConfigError",
    "ImageError",
    "DetectorConfig",
    "DetectionResult",
    "detect",
    "get_lut",
    "benchmark",
    "STAGES",
]

log = logging.getLogger(__name__)

STAGES = ("lut", "gradients", "directions", "merge")


class ConfigError(ValueError):
    """Invalid detector configuration."""


class ImageError(ValueError):
    """Unusable input image."""


@dataclass(frozen=True)
class DetectorConfig:
    M: int = 15
    N: int = 32
    C: float = 0.7
    L: float = 3.0
    d: int = 5
    tolerance: float | None = None  # limit-line agreement, degrees; None -> 180/N
    dedup: bool = True
    dedup_angle: float | None = None  # degrees; None -> 2.5 * 180/N
    min_length: float = 0.0  # output filter on midline length, pixels
    lut_mu_max: float = 8.0
    lut_sigma_max: float = 8.0
    lut_step: float = 1 / 64
    threads: int | None = None
    context_test: str = "tv"  # "tv", or "t" for the t-statistic comparison variant

    def __post_init__(self):
        try:
            self.linker()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.dedup_angle is not None and not self.dedup_angle >= 0:
            raise ConfigError("dedup_angle must be >= 0")
        if self.min_length < 0:
            raise ConfigError("min_length must be >= 0")
        if not (self.lut_mu_max > 0 and self.lut_sigma_max >= 1 and self.lut_step > 0):
            raise ConfigError("invalid LUT extent or step")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.context_test not in ("tv", "t"):
            raise ConfigError(f"unknown context test {self.context_test!r}")

    def linker(self) -> LinkerConfig:
        return LinkerConfig(C=self.C, L=self.L, d=self.d, M=self.M, N=self.N)

    @property
    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    @classmethod
    def from_mapping(cls, values: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    rectangles: list[Rectangle]
    width: int
    height: int
    timing: dict = field(default_factory=dict)
    edges: list[SignedEdgeMap] | None = None  # raster orientation when kept


@functools.lru_cache(maxsize=4)
def get_lut(mu_max: float = 8.0, sigma_max: float = 8.0, step: float = 1 / 64) -> TvLut:
    return build_lut(mu_max, sigma_max, step)


def _as_array(image) -> np.ndarray:
    data = getattr(image, "data", image)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageError(f"expected a 2-D gray image, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ImageError("image contains non-finite values")
    return arr


def _run_direction(img, grads, lut, direction: Direction, config: DetectorConfig, keep_edges):
    params = scan_params(img, direction, config.M)
    if config.context_test == "t":
        context = t_contextual_field(params, config.C, config.L)
    else:
        context = contextual_field(params, lut, config.L)
    edges = link_direction(context, grads, config.linker())
    rects = rectangles_from_edges(edges, config.N, config.M, config.tolerance)
    return rects, (edges if keep_edges else None)


def detect(image, config: DetectorConfig | None = None, keep_edges: bool = False) -> DetectionResult:
    """Detect line segments in a raster gray image (row 0 at the top).

    Returned coordinates are raster pixel centres; ``theta`` is measured
    counter-clockwise from the +x axis as the image is displayed.
    """
    config = config or DetectorConfig()
    arr = _as_array(image)
    rows, cols = arr.shape
    if min(rows, cols) < 3 * config.M:
        raise ImageError(f"image {cols}x{rows} smaller than 3M = {3 * config.M} pixels")

    timing = {}
    start = time.perf_counter()
    t = start
    lut = get_lut(config.lut_mu_max, config.lut_sigma_max, config.lut_step)
    timing["lut"] = time.perf_counter() - t

    t = time.perf_counter()
    img = np.ascontiguousarray(arr[::-1])
    grads = directional_derivatives(img)
    timing["gradients"] = time.perf_counter() - t

    t = time.perf_counter()
    dirs = directions(config.N)
    for dr in dirs:
        polarity(dr)  # raises on degenerate window offsets
    job = functools.partial(_run_direction, img, grads, lut, config=config,
                            keep_edges=keep_edges)
    workers = min(config.workers, len(dirs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(job, dirs))
    else:
        outputs = [job(dr) for dr in dirs]
    timing["directions"] = time.perf_counter() - t

    t = time.perf_counter()
    rects = [r for found, _ in outputs for r in found]
    if config.dedup:
        rects = merge_duplicates(rects, config.N, config.dedup_angle)
    rects = [r.flipped(rows) for r in rects if r.length >= config.min_length]
    rects.sort(key=lambda r: (r.bin, r.x0, r.y0, r.x1, r.y1, r.sign, r.theta, r.width))
    timing["merge"] = time.perf_counter() - t
    timing["total"] = time.perf_counter() - start

    edges = None
    if keep_edges:
        edges = [SignedEdgeMap(e.values[::-1].copy(), e.direction, e.strength[::-1].copy())
                 for _, e in outputs]
    log.debug("detected %d rectangles in %.3fs", len(rects), timing["total"])
    return DetectionResult(rects, cols, rows, timing, edges)


def benchmark(images: dict, config: DetectorConfig | None = None,
              repetitions: int = 3) -> list[dict]:
    """Median per-stage timings and throughput for each named image.

    One untimed warm-up run per image absorbs JIT compilation.
    """
    if not images:
        raise ValueError("need at least one image")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    config = config or DetectorConfig()
    rows = []
    for name, image in images.items():
        arr = _as_array(image)
        detect(arr, config)
        runs = [detect(arr, config) for _ in range(repetitions)]
        row = {"image": name, "width": arr.shape[1], "height": arr.shape[0],
               "directions": config.N, "reps": repetitions,
               "rectangles": len(runs[0].rectangles)}
        for stage in STAGES + ("total",):
            row[f"{stage}_s"] = statistics.median(r.timing[stage] for r in runs)
        row["px_per_s"] = arr.size / row["total_s"]
        rows.append(row)
    return rows
