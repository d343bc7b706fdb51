"""Slow reference implementations shared by several test modules."""
import math

import numpy as np
from numba import njit


def rhaz(v: float) -> int:
    """Round half away from zero, written out independently of seglink."""
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def scan_lines(theta: float, shape):
    """Pixel lists of every scan line, in scan order, built from the line equations.

    H half (theta in [0, 45) or [135, 180)): y = c + R(x tan theta), x increasing.
    V half: x = c + R(y cot theta), y increasing.  Arrays are a[y, x].
    """
    rows, cols = shape
    vertical = 45.0 <= theta < 135.0
    if vertical:
        slope = math.cos(math.radians(theta)) / math.sin(math.radians(theta))
        n_along, n_perp = rows, cols
    else:
        slope = math.tan(math.radians(theta))
        n_along, n_perp = cols, rows
    offs = [rhaz(a * slope) for a in range(n_along)]
    lines = []
    for c in range(-max(offs), n_perp - min(offs)):
        pts = [(a, c + o) for a, o in enumerate(offs) if 0 <= c + o < n_perp]
        if not pts:
            continue
        if vertical:
            lines.append((np.array([a for a, _ in pts]), np.array([p for _, p in pts])))
        else:
            lines.append((np.array([p for _, p in pts]), np.array([a for a, _ in pts])))
    return lines  # (ys, xs) per line


def window_index(theta: float, shape, m: int):
    """(start_y, start_x, win_y, win_x) for every full forward window."""
    sy, sx, wy, wx = [], [], [], []
    for ys, xs in scan_lines(theta, shape):
        for i in range(len(ys) - m + 1):
            sy.append(ys[i])
            sx.append(xs[i])
            wy.append(ys[i:i + m])
            wx.append(xs[i:i + m])
    return np.array(sy), np.array(sx), np.array(wy), np.array(wx)


def window_stats(img, index):
    sy, sx, wy, wx = index
    vals = img[wy, wx]
    return sy, sx, vals.mean(axis=1), vals.var(axis=1, ddof=1)


@njit(cache=True)
def trapezoid_tv(mu_a, s_a, mu_b, s_b, step=1e-3):
    """Half the trapezoid integral of |f_a - f_b| over the union of both
    +-12 sigma intervals, with spacing at most ``step``."""
    a0, a1 = mu_a - 12 * s_a, mu_a + 12 * s_a
    b0, b1 = mu_b - 12 * s_b, mu_b + 12 * s_b
    if b0 < a0:
        a0, a1, b0, b1 = b0, b1, a0, a1
    if b0 <= a1:
        spans = [(a0, max(a1, b1))]
    else:
        spans = [(a0, a1), (b0, b1)]
    ca = 1.0 / (s_a * math.sqrt(2 * math.pi))
    cb = 1.0 / (s_b * math.sqrt(2 * math.pi))
    total = 0.0
    for lo, hi in spans:
        n = int(math.ceil((hi - lo) / step))
        h = (hi - lo) / n
        acc = 0.0
        for i in range(n + 1):
            x = lo + i * h
            za = (x - mu_a) / s_a
            zb = (x - mu_b) / s_b
            # beyond 12 sigma a density is below 1e-31 of its peak
            fa = ca * math.exp(-0.5 * za * za) if abs(za) <= 12.0 else 0.0
            fb = cb * math.exp(-0.5 * zb * zb) if abs(zb) <= 12.0 else 0.0
            v = abs(fa - fb)
            acc += 0.5 * v if i == 0 or i == n else v
        total += acc * h
    return 0.5 * total
