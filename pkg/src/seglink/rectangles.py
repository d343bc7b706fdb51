"""Region growing, limit-line fitting and rectangle construction.

Coordinates are pixel centres in the detector's internal frame (``y`` up).
Angles are degrees in ``[0, 180)``; a :class:`Line` with angle ``phi`` and
offset ``o`` is the set ``{p : -sin(phi) * p.x + cos(phi) * p.y = o}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .directions import Direction
from .linker import SignedEdgeMap

__all__ = [
    "Line",
    "Region",
    "Rectangle",
    "angle_diff",
    "label_regions",
    "fit_limit_lines",
    "validate",
    "build_rectangle",
    "merge_duplicates",
    "rectangles_from_edges",
]

_EIGHT = np.ones((3, 3), dtype=bool)


def angle_diff(a, b):
    """Signed difference ``a - b`` of undirected angles, in ``[-90, 90)``."""
    return (np.asarray(a) - np.asarray(b) + 90.0) % 180.0 - 90.0


@dataclass(frozen=True)
class Line:
    angle: float
    offset: float

    @property
    def normal(self) -> tuple[float, float]:
        rad = math.radians(self.angle)
        return -math.sin(rad), math.cos(rad)


@dataclass(frozen=True, eq=False)
class Region:
    label: int
    sign: int
    xs: np.ndarray
    ys: np.ndarray
    direction: Direction

    def __len__(self) -> int:
        return int(self.xs.size)


@dataclass(frozen=True)
class Rectangle:
    """A validated segment: orientation, midline, width and polarity.

    ``sign`` is +1 when the brighter side lies to the left of the direction
    ``(cos theta, sin theta)``, i.e. counter-clockwise from it.

    The four limiting lines are the two sides parallel to the midline at
    ``width / 2`` and the two end lines perpendicular to it through the
    midline endpoints (see :meth:`corners`).
    """

    theta: float
    x0: float
    y0: float
    x1: float
    y1: float
    width: float
    sign: int
    bin: int
    score: float

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def corners(self) -> np.ndarray:
        rad = math.radians(self.theta)
        h = 0.5 * self.width
        nx, ny = -math.sin(rad) * h, math.cos(rad) * h
        return np.array([
            [self.x0 + nx, self.y0 + ny],
            [self.x1 + nx, self.y1 + ny],
            [self.x1 - nx, self.y1 - ny],
            [self.x0 - nx, self.y0 - ny],
        ])

    def flipped(self, height: int) -> "Rectangle":
        """Same rectangle with ``y`` measured downwards in an image of ``height`` rows.

        The picture does not change, so ``theta`` and ``sign`` are kept.
        """
        top = height - 1
        return replace(self, y0=top - self.y0, y1=top - self.y1)


def label_regions(edges: SignedEdgeMap, min_size: int = 15) -> list[Region]:
    """Same-sign 8-connected components with at least ``min_size`` pixels."""
    regions = []
    label = 0
    for sign in (1, -1):
        labels, count = ndimage.label(edges.values == sign, structure=_EIGHT)
        if count == 0:
            continue
        sizes = np.bincount(labels.ravel())
        ys, xs = np.nonzero(labels)
        lab = labels[ys, xs]
        order = np.argsort(lab, kind="stable")
        ys, xs, lab = ys[order], xs[order], lab[order]
        bounds = np.searchsorted(lab, np.arange(1, count + 2))
        for k in range(1, count + 1):
            if sizes[k] < min_size:
                continue
            lo, hi = bounds[k - 1], bounds[k]
            label += 1
            regions.append(Region(label, sign, xs[lo:hi], ys[lo:hi], edges.direction))
    return regions


def _tls(xs: np.ndarray, ys: np.ndarray, fallback: float) -> Line:
    cx, cy = xs.mean(), ys.mean()
    dx, dy = xs - cx, ys - cy
    cov = np.array([[dx @ dx, dx @ dy], [dx @ dy, dy @ dy]])
    if xs.size < 2 or cov.trace() == 0:
        angle = fallback
    else:
        _, vecs = np.linalg.eigh(cov)
        vx, vy = vecs[:, 1]
        angle = math.degrees(math.atan2(vy, vx)) % 180.0
    rad = math.radians(angle)
    return Line(angle, -math.sin(rad) * cx + math.cos(rad) * cy)


def fit_limit_lines(region: Region) -> tuple[Line, Line]:
    """TLS lines through the per-scan-line extremes of a region.

    For every along position the pixel with the smallest perpendicular
    offset goes to the ``upper`` set and the largest to ``lower``.
    """
    d = region.direction
    rad = math.radians(d.theta)
    xs = region.xs.astype(np.float64)
    ys = region.ys.astype(np.float64)
    off = -math.sin(rad) * xs + math.cos(rad) * ys
    along = region.ys if d.vertical else region.xs
    order = np.lexsort((off, along))
    along_s = along[order]
    first = np.r_[True, along_s[1:] != along_s[:-1]]
    last = np.r_[along_s[1:] != along_s[:-1], True]
    lo, hi = order[first], order[last]
    upper = _tls(xs[lo], ys[lo], d.theta)
    lower = _tls(xs[hi], ys[hi], d.theta)
    return upper, lower


def validate(upper: Line, lower: Line, direction: Direction, count: int,
             tolerance: float | None = None) -> float | None:
    """Rectangle angle if the limit lines agree and stay in the bin, else None.

    ``tolerance`` bounds ``|theta_upper - theta_lower|`` and defaults to the
    full bin width ``180 / count``.
    """
    if tolerance is None:
        tolerance = 180.0 / count
    diff = float(angle_diff(lower.angle, upper.angle))
    if abs(diff) > tolerance:
        return None
    theta = (upper.angle + 0.5 * diff) % 180.0
    if abs(float(angle_diff(theta, direction.theta))) > 90.0 / count + 1e-9:
        return None
    return theta


def _meet(line: Line, ux: float, uy: float, t: float) -> np.ndarray:
    # Solve n . p = offset and u . p = t.
    nx, ny = line.normal
    a = np.array([[nx, ny], [ux, uy]])
    return np.linalg.solve(a, np.array([line.offset, t]))


def build_rectangle(region: Region, upper: Line, lower: Line, theta: float,
                    strength: np.ndarray | None = None) -> Rectangle:
    rad = math.radians(theta)
    ux, uy = math.cos(rad), math.sin(rad)
    proj = region.xs * ux + region.ys * uy
    t0, t1 = float(proj.min()), float(proj.max())
    u0, u1 = _meet(upper, ux, uy, t0), _meet(upper, ux, uy, t1)
    l0, l1 = _meet(lower, ux, uy, t0), _meet(lower, ux, uy, t1)
    p0 = 0.5 * (u0 + l0)
    p1 = 0.5 * (u1 + l1)
    nx, ny = -uy, ux
    gap = 0.5 * (abs(nx * (l0[0] - u0[0]) + ny * (l0[1] - u0[1]))
                 + abs(nx * (l1[0] - u1[0]) + ny * (l1[1] - u1[1])))
    score = float("nan")
    if strength is not None:
        vals = strength[region.ys, region.xs]
        if np.isfinite(vals).any():
            score = float(np.nanmean(vals))
    # Report polarity as "brighter side on the left of the midline direction".
    # theta_R may wrap past 0/180 relative to the bin centre, which reverses
    # (cos, sin) and therefore left and right.
    sign = region.sign * region.direction.top_side()
    if math.cos(math.radians(theta - region.direction.theta)) < 0:
        sign = -sign
    return Rectangle(theta, float(p0[0]), float(p0[1]), float(p1[0]), float(p1[1]),
                     float(gap) + 1.0, sign, region.direction.index, score)


def _sort_key(r: Rectangle):
    return (r.bin, r.x0, r.y0, r.x1, r.y1, r.sign, r.theta, r.width)


def merge_duplicates(rects: list[Rectangle], count: int,
                     angle_tol: float | None = None) -> list[Rectangle]:
    """Drop rectangles that repeat a longer one found in a nearby bin.

    Two rectangles are duplicates when they share a polarity, their angles
    differ by at most ``angle_tol`` degrees, at least half of the shorter
    midline overlaps the longer one, and the shorter midline's centre lies
    within the larger width of the longer midline's line.  ``angle_tol``
    defaults to ``2.5 * 180 / count``: a scan line two bins away from an edge
    crosses it over about ``M`` pixels and yields a thin run whose fitted
    angle is that bin's centre.
    """
    if not rects:
        return []
    order = sorted(rects, key=lambda r: (-r.length, _sort_key(r)))
    theta = np.array([r.theta for r in order])
    sign = np.array([r.sign for r in order])
    p0 = np.array([[r.x0, r.y0] for r in order])
    p1 = np.array([[r.x1, r.y1] for r in order])
    width = np.array([r.width for r in order])
    length = np.array([r.length for r in order])
    mid = 0.5 * (p0 + p1)
    keep = np.zeros(len(order), dtype=bool)
    tol = 2.5 * 180.0 / count if angle_tol is None else angle_tol
    for i in range(len(order)):
        kept = np.nonzero(keep)[0]
        if kept.size:
            # Midline directions of a pair straddling 0/180 degrees point opposite
            # ways, which swaps left and right.
            flip = np.where(np.abs(theta[kept] - theta[i]) > 90.0, -1, 1)
            cand = kept[(sign[kept] * flip == sign[i])
                        & (np.abs(angle_diff(theta[kept], theta[i])) <= tol)]
            if cand.size:
                rad = np.radians(theta[cand])
                u = np.column_stack([np.cos(rad), np.sin(rad)])
                a0 = np.einsum("ij,ij->i", p0[cand], u)
                a1 = np.einsum("ij,ij->i", p1[cand], u)
                b0 = p0[i] @ u.T
                b1 = p1[i] @ u.T
                lo = np.maximum(np.minimum(a0, a1), np.minimum(b0, b1))
                hi = np.minimum(np.maximum(a0, a1), np.maximum(b0, b1))
                overlap = np.maximum(hi - lo, 0.0)
                shorter = np.maximum(np.minimum(length[cand], length[i]), 1e-9)
                nrm = np.column_stack([-u[:, 1], u[:, 0]])
                sep = np.abs(np.einsum("ij,ij->i", mid[i] - mid[cand], nrm))
                dup = (overlap / shorter >= 0.5) & (sep <= np.maximum(width[cand], width[i]))
                if dup.any():
                    continue
        keep[i] = True
    return sorted((r for r, k in zip(order, keep) if k), key=_sort_key)


def rectangles_from_edges(edges: SignedEdgeMap, count: int, min_size: int = 15,
                          tolerance: float | None = None) -> list[Rectangle]:
    """All validated rectangles of one direction's edge map.

    Rectangles whose pixel extent along the midline (centre-to-centre length
    plus one) is below ``min_size`` are dropped.
    """
    out = []
    for region in label_regions(edges, min_size):
        upper, lower = fit_limit_lines(region)
        theta = validate(upper, lower, edges.direction, count, tolerance)
        if theta is None:
            continue
        rect = build_rectangle(region, upper, lower, theta, edges.strength)
        if rect.length + 1.0 >= min_size - 1e-9:
            out.append(rect)
    return out
