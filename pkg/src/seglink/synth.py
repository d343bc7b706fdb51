"""Synthetic test images with known ground truth.

A scene is a plain dict (JSON-compatible)::

    {
      "width": 256, "height": 128, "seed": 7,
      "background": 0.0, "noise": 0.0,
      "textures": [{"x0": 0, "y0": 0, "x1": 128, "y1": 128, "mean": 128, "std": 5}],
      "bars": [{"x0": 20, "y0": 64, "x1": 140, "y1": 64, "width": 3, "value": 100}]
    }

Coordinates are raster pixels (``y`` down, pixel centres on integers).
Textured rectangles cover ``[x0, x1) x [y0, y1)`` and may not overlap.  Bars
are painted in list order over everything before them, with 4x4 supersampled
coverage as opacity, so later bars occlude earlier ones.  ``noise`` adds
Gaussian noise to the whole image last.  Random numbers come from a PCG64
generator seeded with ``seed``, so images are bit-stable across platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SceneError",
    "Bar",
    "Texture",
    "Scene",
    "SyntheticImage",
    "parse_scene",
    "generate_synthetic",
    "bar_scene",
    "crossing_scene",
    "variance_scene",
]

_SUPERSAMPLE = 4


class SceneError(ValueError):
    """Inconsistent or malformed scene description."""


@dataclass(frozen=True)
class Bar:
    x0: float
    y0: float
    x1: float
    y1: float
    width: float
    value: float

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def theta(self) -> float:
        """Angle as displayed, counter-clockwise from +x, in [0, 180)."""
        return math.degrees(math.atan2(-(self.y1 - self.y0), self.x1 - self.x0)) % 180.0

    def corners(self) -> np.ndarray:
        L = self.length
        ux, uy = (self.x1 - self.x0) / L, (self.y1 - self.y0) / L
        h = 0.5 * self.width
        nx, ny = -uy * h, ux * h
        return np.array([
            [self.x0 + nx, self.y0 + ny], [self.x1 + nx, self.y1 + ny],
            [self.x1 - nx, self.y1 - ny], [self.x0 - nx, self.y0 - ny],
        ])

    def as_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1,
                "width": self.width, "value": self.value,
                "theta_deg": self.theta, "length": self.length}


@dataclass(frozen=True)
class Texture:
    x0: int
    y0: int
    x1: int
    y1: int
    mean: float
    std: float

    def overlaps(self, other: "Texture") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)

    def as_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1,
                "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Scene:
    width: int
    height: int
    seed: int = 0
    background: float = 0.0
    noise: float = 0.0
    textures: tuple = ()
    bars: tuple = ()


@dataclass(frozen=True, eq=False)
class SyntheticImage:
    data: np.ndarray  # float64, raster orientation
    scene: Scene
    truth: dict = field(default_factory=dict)


def _number(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise SceneError(f"missing field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SceneError(f"field {key!r} must be a finite number, got {v!r}")
    return float(v)


def parse_scene(spec: dict) -> Scene:
    if not isinstance(spec, dict):
        raise SceneError("scene must be a JSON object")
    w = int(_number(spec, "width"))
    h = int(_number(spec, "height"))
    if w < 1 or h < 1:
        raise SceneError("image size must be positive")
    noise = _number(spec, "noise", 0.0)
    if noise < 0:
        raise SceneError("noise must be >= 0")
    seed = int(_number(spec, "seed", 0))
    if seed < 0:
        raise SceneError("seed must be >= 0")

    textures = []
    for t in spec.get("textures", []):
        tex = Texture(int(_number(t, "x0")), int(_number(t, "y0")), int(_number(t, "x1")),
                      int(_number(t, "y1")), _number(t, "mean"), _number(t, "std", 0.0))
        if tex.std < 0:
            raise SceneError("texture std must be >= 0")
        if not (0 <= tex.x0 < tex.x1 <= w and 0 <= tex.y0 < tex.y1 <= h):
            raise SceneError(f"texture {tex} outside the image or empty")
        if any(tex.overlaps(o) for o in textures):
            raise SceneError(f"texture {tex} overlaps another texture")
        textures.append(tex)

    bars = []
    for b in spec.get("bars", []):
        bar = Bar(_number(b, "x0"), _number(b, "y0"), _number(b, "x1"), _number(b, "y1"),
                  _number(b, "width"), _number(b, "value"))
        if bar.width <= 0:
            raise SceneError("bar width must be positive")
        if bar.length <= 0:
            raise SceneError("bar endpoints coincide")
        c = bar.corners()
        if (c[:, 0].min() < -0.5 or c[:, 0].max() > w - 0.5
                or c[:, 1].min() < -0.5 or c[:, 1].max() > h - 0.5):
            raise SceneError(f"bar {bar} leaves the image")
        bars.append(bar)

    return Scene(w, h, seed, _number(spec, "background", 0.0), noise,
                 tuple(textures), tuple(bars))


def _coverage(bar: Bar, shape) -> tuple[np.ndarray, tuple[slice, slice]]:
    """Supersampled area fraction of ``bar`` over its bounding box."""
    h, w = shape
    c = bar.corners()
    xa = max(int(math.floor(c[:, 0].min() - 0.5)), 0)
    xb = min(int(math.ceil(c[:, 0].max() + 0.5)) + 1, w)
    ya = max(int(math.floor(c[:, 1].min() - 0.5)), 0)
    yb = min(int(math.ceil(c[:, 1].max() + 0.5)) + 1, h)
    k = _SUPERSAMPLE
    sub = (np.arange(k) + 0.5) / k - 0.5
    xs = (np.arange(xa, xb)[:, None] + sub[None, :]).ravel()
    ys = (np.arange(ya, yb)[:, None] + sub[None, :]).ravel()
    L = bar.length
    ux, uy = (bar.x1 - bar.x0) / L, (bar.y1 - bar.y0) / L
    dx = xs[None, :] - bar.x0
    dy = ys[:, None] - bar.y0
    along = dx * ux + dy * uy
    across = -dx * uy + dy * ux
    inside = (along >= 0) & (along <= L) & (np.abs(across) <= 0.5 * bar.width)
    cov = inside.reshape(yb - ya, k, xb - xa, k).mean(axis=(1, 3))
    return cov, (slice(ya, yb), slice(xa, xb))


def generate_synthetic(spec) -> SyntheticImage:
    """Render a scene; ``spec`` is a dict or a parsed :class:`Scene`."""
    scene = spec if isinstance(spec, Scene) else parse_scene(spec)
    rng = np.random.Generator(np.random.PCG64(scene.seed))
    img = np.full((scene.height, scene.width), scene.background, dtype=np.float64)
    for tex in scene.textures:
        patch = (tex.y1 - tex.y0, tex.x1 - tex.x0)
        img[tex.y0:tex.y1, tex.x0:tex.x1] = tex.mean + tex.std * rng.standard_normal(patch)
    for bar in scene.bars:
        cov, win = _coverage(bar, img.shape)
        img[win] = img[win] * (1.0 - cov) + bar.value * cov
    if scene.noise > 0:
        img += scene.noise * rng.standard_normal(img.shape)
    truth = {
        "width": scene.width,
        "height": scene.height,
        "bars": [b.as_dict() for b in scene.bars],
        "textures": [t.as_dict() for t in scene.textures],
    }
    return SyntheticImage(img, scene, truth)


# -- canned scenes ---------------------------------------------------------

def bar_scene(length: float = 120, width: float = 3, contrast: float = 100,
              angle: float = 0.0, size: int = 200, noise: float = 0.0, seed: int = 0) -> dict:
    """One bar centred in a ``size`` x ``size`` image, ``angle`` counter-clockwise."""
    c = (size - 1) / 2.0
    rad = math.radians(angle)
    hx, hy = 0.5 * length * math.cos(rad), -0.5 * length * math.sin(rad)
    return {
        "width": size, "height": size, "seed": seed, "background": 0.0, "noise": noise,
        "bars": [{"x0": c - hx, "y0": c - hy, "x1": c + hx, "y1": c + hy,
                  "width": width, "value": contrast}],
    }


def crossing_scene(seed: int = 0, noise: float = 0.0) -> dict:
    """Grid of crossing bars with widths 1 to 7 on a black background.

    The two wide bars (7 and 6 px, gray) are painted first and are crossed
    only by 1 px bars.  All narrower bars are twice as bright and share one
    intensity, so they occlude each other where they cross.
    """
    wide, bright = 100.0, 200.0
    bars = [
        (40, 90, 470, 90, 7, wide),
        (40, 420, 470, 420, 6, wide),
        (40, 200, 470, 200, 3, bright),
        (40, 310, 250, 310, 4, bright),
        (120, 40, 120, 470, 1, bright),
        (330, 150, 330, 360, 2, bright),
        (420, 150, 420, 360, 5, bright),
        (150, 380, 300, 120, 2, bright),
        (200, 470, 460, 40, 1, bright),
    ]
    keys = ("x0", "y0", "x1", "y1", "width", "value")
    return {"width": 512, "height": 512, "seed": seed, "background": 0.0,
            "noise": noise, "bars": [dict(zip(keys, b)) for b in bars]}


def variance_scene(size: int = 256, mean: float = 128.0, std_a: float = 5.0,
                   std_b: float = 25.0, seed: int = 0) -> dict:
    """Two textures with equal means and different spreads, split vertically."""
    half = size // 2
    return {
        "width": size, "height": size, "seed": seed, "background": mean,
        "textures": [
            {"x0": 0, "y0": 0, "x1": half, "y1": size, "mean": mean, "std": std_a},
            {"x0": half, "y0": 0, "x1": size, "y1": size, "mean": mean, "std": std_b},
        ],
    }
