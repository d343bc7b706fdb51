"""Scan directions, line addressing and running window statistics.

Arrays are indexed ``a[y, x]`` with ``y`` pointing *up*, so a direction of
45 degrees runs towards larger ``x`` and larger ``y``.  Raster images (row 0
at the top) must be flipped vertically before use; :mod:`seglink.pipeline`
does this.

A direction in the horizontal half (H) splits the image into lines
``y = c + R(x * tan(theta))`` traversed with increasing ``x``; a direction in
the vertical half (V) uses ``x = c + R(y * cot(theta))`` traversed with
increasing ``y``.  ``R`` rounds half away from zero and ``c`` is the line
intercept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "Direction",
    "ParamField",
    "LineGeometry",
    "OutOfImage",
    "round_half_away",
    "classify",
    "directions",
    "address",
    "line_geometry",
    "scan_params",
]

# Periodic re-summation interval for the running accumulators.
_RESEED = 256


class OutOfImage(ValueError):
    """An address fell outside the image."""


def round_half_away(v):
    """Round half away from zero (scalar or array)."""
    a = np.asarray(v, dtype=np.float64)
    r = np.sign(a) * np.floor(np.abs(a) + 0.5)
    return r.astype(np.int64) if r.ndim else int(r)


def _round_unit(v: float) -> int:
    # sin/cos of grid angles can land an ulp below 0.5.
    return int(math.copysign(math.floor(abs(v) + 0.5 + 1e-12), v))


@dataclass(frozen=True)
class Direction:
    """One scan direction.

    ``index`` is 1-based (``theta = 180 * (index - 1) / count``).  ``half`` is
    ``"H"`` or ``"V"`` and ``quadrant`` selects the derivative kernel.
    """

    index: int
    count: int
    theta: float
    half: str
    quadrant: int

    @classmethod
    def at(cls, theta: float, index: int = 0, count: int = 0) -> "Direction":
        theta = float(theta) % 180.0
        half = "V" if 45.0 <= theta < 135.0 else "H"
        if theta < 22.5 or theta >= 157.5:
            quadrant = 0
        elif theta < 67.5:
            quadrant = 45
        elif theta < 112.5:
            quadrant = 90
        else:
            quadrant = 135
        return cls(index, count, theta, half, quadrant)

    @property
    def vertical(self) -> bool:
        return self.half == "V"

    @property
    def slope(self) -> float:
        """Perpendicular step per along step: tan(theta) for H, cot(theta) for V."""
        angle = self.theta if self.half == "H" else 90.0 - self.theta
        return math.tan(math.radians(angle))

    @property
    def perp_step(self) -> tuple[int, int]:
        """Rounded (sin, cos) used to reach the neighbouring sample windows."""
        rad = math.radians(self.theta)
        return _round_unit(math.sin(rad)), _round_unit(math.cos(rad))

    @property
    def unit(self) -> tuple[float, float]:
        rad = math.radians(self.theta)
        return math.cos(rad), math.sin(rad)

    def top_vector(self) -> tuple[float, float]:
        """Approximate pixel displacement from a pixel to its top window."""
        dl, da = self.line_offset()
        t = self.slope
        if self.half == "H":
            return float(da), dl + da * t
        return dl + da * t, float(da)

    def top_side(self) -> int:
        """+1 if the top window lies left of ``unit`` (counter-clockwise), else -1."""
        tx, ty = self.top_vector()
        ux, uy = self.unit
        side = -uy * tx + ux * ty
        if abs(side) < 1e-9:
            raise AssertionError(f"top window on the scan line at theta={self.theta}")
        return 1 if side > 0 else -1

    def line_offset(self) -> tuple[int, int]:
        """(line shift, along shift) from a pixel to its top neighbour window.

        The bottom window uses the negated shift.  In line coordinates the top
        window sits at ``A(x - [sin], y - [cos])``; for the V half the first
        argument of ``A`` is the line index and the second the position.
        """
        s, c = self.perp_step
        if self.half == "H":
            return -c, -s
        return -s, -c


def classify(n: int, count: int) -> Direction:
    if count < 1 or not 1 <= n <= count:
        raise ValueError(f"direction index {n} outside 1..{count}")
    return Direction.at(180.0 * (n - 1) / count, n, count)


def directions(count: int) -> list[Direction]:
    return [classify(n, count) for n in range(1, count + 1)]


def address(x: int, y: int, direction: Direction, gamma: int = 0,
            shape: tuple[int, int] | None = None) -> tuple[int, int]:
    """Pixel ``(x, y)`` addressed by line coordinates under ``direction``.

    For the H half ``y`` is the line intercept and ``x`` the position; for the
    V half ``x`` is the intercept and ``y`` the position.  ``gamma`` shifts by
    whole image extents.  With ``shape`` (rows, cols) given, addresses outside
    the image raise :class:`OutOfImage`.
    """
    t = direction.slope
    rows = shape[0] if shape else 0
    cols = shape[1] if shape else 0
    if direction.half == "H":
        px, py = x, y + round_half_away(x * t) + gamma * rows
    else:
        px, py = x + round_half_away(y * t) + gamma * cols, y
    if shape is not None and not (0 <= px < cols and 0 <= py < rows):
        raise OutOfImage(f"({px}, {py}) outside {cols}x{rows} image")
    return px, py


@dataclass(frozen=True)
class LineGeometry:
    """Enumeration of the scan lines of one direction over an image."""

    vertical: bool
    offsets: np.ndarray  # perpendicular offset per along position
    n_along: int
    n_perp: int

    @property
    def intercepts(self) -> range:
        return range(-int(self.offsets.max()), self.n_perp - int(self.offsets.min()))

    def line_pixels(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        """(xs, ys) of the in-image pixels of line ``c`` in scan order."""
        perp = c + self.offsets
        keep = (perp >= 0) & (perp < self.n_perp)
        along = np.nonzero(keep)[0]
        perp = perp[keep]
        return (perp, along) if self.vertical else (along, perp)


def line_geometry(direction: Direction, shape: tuple[int, int]) -> LineGeometry:
    rows, cols = shape
    vertical = direction.vertical
    n_along, n_perp = (rows, cols) if vertical else (cols, rows)
    offsets = round_half_away(np.arange(n_along) * direction.slope)
    offsets = np.atleast_1d(offsets).astype(np.int64)
    return LineGeometry(vertical, offsets, n_along, n_perp)


@dataclass(frozen=True, eq=False)
class ParamField:
    """Per-pixel Normal parameters of the forward ``window`` along a direction.

    Pixels whose window leaves the image hold NaN.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    direction: Direction
    window: int

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.mu)


@njit(cache=True, nogil=True)
def _line_span(offsets, c, n_perp):
    n = offsets.shape[0]
    first = -1
    last = -1
    for a in range(n):
        p = c + offsets[a]
        if 0 <= p < n_perp:
            if first < 0:
                first = a
            last = a
        elif first >= 0:
            break
    return first, last


@njit(cache=True, nogil=True)
def _scan_kernel(img, offsets, vertical, n_perp, m, mu, sigma2):
    omin = offsets.min()
    omax = offsets.max()
    inv_m = 1.0 / m
    inv_m1 = 1.0 / (m - 1)
    for c in range(-omax, n_perp - omin):
        first, last = _line_span(offsets, c, n_perp)
        if first < 0 or last - first + 1 < m:
            continue
        sx = 0.0
        sxx = 0.0
        for a in range(first, last - m + 2):
            if a == first or (a - first) % _RESEED == 0:
                sx = 0.0
                sxx = 0.0
                for k in range(a, a + m):
                    p = c + offsets[k]
                    v = img[k, p] if vertical else img[p, k]
                    sx += v
                    sxx += v * v
            else:
                po = c + offsets[a - 1]
                pi = c + offsets[a + m - 1]
                if vertical:
                    vo = img[a - 1, po]
                    vi = img[a + m - 1, pi]
                else:
                    vo = img[po, a - 1]
                    vi = img[pi, a + m - 1]
                sx += vi - vo
                sxx += vi * vi - vo * vo
            var = (sxx - sx * sx * inv_m) * inv_m1
            if var < 0.0:
                var = 0.0
            p = c + offsets[a]
            if vertical:
                mu[a, p] = sx * inv_m
                sigma2[a, p] = var
            else:
                mu[p, a] = sx * inv_m
                sigma2[p, a] = var


def scan_params(image: np.ndarray, direction: Direction, window: int = 15) -> ParamField:
    """Running mean and variance of ``window`` pixels starting at each pixel.

    The accumulators are updated by removing the exiting pixel and adding the
    entering one, and re-summed every few hundred steps to bound drift.
    """
    if window < 2:
        raise ValueError("window must hold at least two samples")
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    geo = line_geometry(direction, img.shape)
    mu = np.full(img.shape, np.nan)
    sigma2 = np.full(img.shape, np.nan)
    _scan_kernel(img, geo.offsets, geo.vertical, geo.n_perp, window, mu, sigma2)
    return ParamField(mu, sigma2, direction, window)
