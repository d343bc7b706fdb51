"""Connected edge maps from contextual and local edges.

For every scan line of a direction a three-state machine walks the pixels:

1. *search*: look for a pixel whose contextual edge passes the TV threshold
   and whose local derivative agrees in sign and exceeds ``L_C``;
2. *initial area*: the next ``M`` pixels must contain sign-matching local
   edges with gaps of at most ``d`` pixels; if so they are all marked;
3. *mark area*: the head advances one pixel at a time while the contextual
   sign holds, extending the run at its far end under the same gap rule.
   When the run ends, its trailing non-edge pixels are unmarked.

Contextual edges are evaluated between the windows of the two neighbouring
lines, ``top`` and ``bottom``.  The top window lies on the right of the scan
direction in the H half and on its left in the V half, so each direction
carries a fixed ``polarity`` that orients the local derivative to
``sgn(mu_top - mu_bottom)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .directions import Direction, ParamField, line_geometry, round_half_away
from .gradients import KERNEL_AXES, GradientStack
from .stats import (
    NormalParams,
    SIGMA_FLOOR,
    TvLut,
    equivalent_t_threshold,
    lut_lookup,
    normalize,
    normalize_array,
)

__all__ = [
    "LinkerConfig",
    "SignedEdgeMap",
    "ContextualField",
    "contextual_edge",
    "local_threshold",
    "polarity",
    "contextual_field",
    "t_contextual_field",
    "find_initial",
    "extend_run",
    "link_line",
    "link_direction",
]


@dataclass(frozen=True)
class LinkerConfig:
    C: float = 0.7
    L: float = 3.0
    d: int = 5
    M: int = 15
    N: int = 32

    def __post_init__(self):
        if not 0 < self.C <= 1:
            raise ValueError(f"C must lie in (0, 1], got {self.C}")
        if self.L < 0:
            raise ValueError(f"L must be >= 0, got {self.L}")
        if self.d < 0 or int(self.d) != self.d:
            raise ValueError(f"d must be a non-negative integer, got {self.d}")
        if self.M < 2 or int(self.M) != self.M:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")
        if self.N < 1 or int(self.N) != self.N:
            raise ValueError(f"N must be a positive integer, got {self.N}")


@dataclass(frozen=True, eq=False)
class SignedEdgeMap:
    """Per-direction map of connected edge points with values in {-1, 0, 1}."""

    values: np.ndarray
    direction: Direction
    strength: np.ndarray  # |delta| at each pixel, NaN where undefined


@dataclass(frozen=True, eq=False)
class ContextualField:
    """Signed contextual edge and local threshold at every pixel."""

    delta: np.ndarray
    lc: np.ndarray
    direction: Direction


def contextual_edge(top: NormalParams, bottom: NormalParams, lut: TvLut,
                    C: float = 0.7) -> tuple[float, bool]:
    """Signed TV distance between two windows and whether it reaches ``C``."""
    a = top.clamped()
    b = bottom.clamped()
    diff = top.mu - bottom.mu
    if diff == 0:
        return 0.0, False
    delta = math.copysign(lut_lookup(lut, normalize(a, b)), diff)
    return delta, abs(delta) >= C


def local_threshold(L: float, mu_top: float, mu_bottom: float) -> float:
    return max(L, abs(mu_top - mu_bottom) / 2.0)


def polarity(direction: Direction) -> int:
    """+1 when the local derivative already points from bottom to top window."""
    ux, uy = direction.unit
    gx, gy = KERNEL_AXES[direction.quadrant]
    side_grad = -uy * gx + ux * gy
    if abs(side_grad) < 1e-9:
        raise AssertionError(f"kernel parallel to scan line at theta={direction.theta}")
    return direction.top_side() * (1 if side_grad > 0 else -1)


def _neighbour_index(field_shape, direction: Direction, sign: int):
    """Pixel coordinates of the top (sign=+1) or bottom (sign=-1) window."""
    rows, cols = field_shape
    dl, da = direction.line_offset()
    dl, da = sign * dl, sign * da
    t = direction.slope
    if direction.half == "H":
        along = np.arange(cols)
        shift = dl + round_half_away((along + da) * t) - round_half_away(along * t)
        nx = np.broadcast_to(along + da, (rows, cols))
        ny = np.arange(rows)[:, None] + shift[None, :]
    else:
        along = np.arange(rows)
        shift = dl + round_half_away((along + da) * t) - round_half_away(along * t)
        nx = np.arange(cols)[None, :] + shift[:, None]
        ny = np.broadcast_to((along + da)[:, None], (rows, cols))
    inside = (nx >= 0) & (nx < cols) & (ny >= 0) & (ny < rows)
    return np.where(inside, ny, 0), np.where(inside, nx, 0), inside


def _gather(arr, iy, ix, inside):
    out = arr[iy, ix]
    return np.where(inside, out, np.nan)


def _window_pairs(params: ParamField):
    shape = params.mu.shape
    ty, tx, tin = _neighbour_index(shape, params.direction, +1)
    by, bx, bin_ = _neighbour_index(shape, params.direction, -1)
    mu_t = _gather(params.mu, ty, tx, tin)
    var_t = _gather(params.sigma2, ty, tx, tin)
    mu_b = _gather(params.mu, by, bx, bin_)
    var_b = _gather(params.sigma2, by, bx, bin_)
    return mu_t, var_t, mu_b, var_b


def contextual_field(params: ParamField, lut: TvLut, L: float = 3.0) -> ContextualField:
    """Signed TV contextual edge and ``L_C`` for every pixel of a direction."""
    mu_t, var_t, mu_b, var_b = _window_pairs(params)
    with np.errstate(invalid="ignore"):
        mp, sp = normalize_array(mu_t, var_t, mu_b, var_b, SIGMA_FLOOR)
        undefined = np.isnan(mp) | np.isnan(sp)
        mag = lut.lookup(np.where(undefined, 0.0, mp), np.where(undefined, 1.0, sp))
        diff = mu_t - mu_b
        delta = np.where(undefined, np.nan, mag * np.sign(diff))
        lc = np.maximum(L, np.abs(diff) / 2.0)
    return ContextualField(delta, lc, params.direction)


def t_contextual_field(params: ParamField, C: float = 0.7, L: float = 3.0) -> ContextualField:
    """Contextual edges from a two-sample t test instead of the TV distance.

    ``|t|`` is compared with the threshold that matches ``C`` for equal
    variances; passing pixels get ``delta = +-1`` and the rest 0.  Used to
    contrast the two tests.
    """
    m = params.window
    t_c = equivalent_t_threshold(C, m) if C < 1 else math.inf
    mu_t, var_t, mu_b, var_b = _window_pairs(params)
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.maximum(var_t, 0.0) + np.maximum(var_b, 0.0)
        diff = mu_t - mu_b
        t = diff / np.sqrt(np.maximum(var, 2 * SIGMA_FLOOR**2) / m)
        delta = np.where(np.abs(t) >= t_c, np.sign(diff), 0.0)
        delta = np.where(np.isnan(t), np.nan, delta)
        lc = np.maximum(L, np.abs(diff) / 2.0)
    return ContextualField(delta, lc, params.direction)


# -- line state machine ----------------------------------------------------

@njit(cache=True, nogil=True)
def find_initial(delta, lc, grad, x, m, d, c_thr):
    """Try to open a run at ``x``; returns the gap counter or -1 on failure."""
    dl = delta[x]
    if not abs(dl) >= c_thr:
        return -1
    thr = lc[x]
    g1 = grad[x]
    if not (abs(g1) >= thr and dl * g1 > 0):
        return -1
    s = 1.0 if dl > 0 else -1.0
    n = delta.shape[0]
    gc = 0
    for k in range(m):
        if gc > d:
            break
        pos = x + k
        if pos < n and s * grad[pos] >= thr:
            gc = 0
        else:
            gc += 1
    if gc > d:
        return -1
    return gc


@njit(cache=True, nogil=True)
def extend_run(delta, lc, grad, x, m, d, c_thr, sign, gc):
    """Advance an open run whose head is at ``x``.

    Returns ``(alive, gc)``.  A dead run's last ``gc`` evaluated pixels are
    non-edges that the caller must unmark.
    """
    dl = delta[x]
    if not (abs(dl) >= c_thr and dl * sign > 0):
        return False, gc
    pos = x + m - 1
    if pos < delta.shape[0] and sign * grad[pos] >= lc[x]:
        gc = 0
    else:
        gc += 1
    return gc <= d, gc


@njit(cache=True, nogil=True)
def _close_run(marks, sign, run_start, last_eval, gc, protect, m):
    n = marks.shape[0]
    lo = max(last_eval - gc + 1, protect + 1)
    for p in range(lo, min(last_eval, n - 1) + 1):
        if marks[p] == sign:
            marks[p] = 0
    run_end = min(last_eval - gc, n - 1)
    seg = run_end
    while seg >= 0 and marks[seg] == sign:
        seg -= 1
    if run_end - seg < m:
        for p in range(max(run_start, protect + 1), run_end + 1):
            if marks[p] == sign:
                marks[p] = 0
        return protect
    return max(protect, run_end)


@njit(cache=True, nogil=True)
def _link_line(delta, lc, grad, m, d, c_thr, marks):
    n = delta.shape[0]
    searching = True
    sign = 0
    gc = 0
    run_start = 0
    protect = -1
    for x in range(n):
        if searching:
            g = find_initial(delta, lc, grad, x, m, d, c_thr)
            if g >= 0:
                sign = 1 if delta[x] > 0 else -1
                for p in range(x, min(x + m, n)):
                    if p > protect or marks[p] != -sign:
                        marks[p] = sign
                gc = g
                run_start = x
                searching = False
        else:
            alive, gc_new = extend_run(delta, lc, grad, x, m, d, c_thr, sign, gc)
            if alive:
                gc = gc_new
                pos = x + m - 1
                if pos < n and (pos > protect or marks[pos] != -sign):
                    marks[pos] = sign
            else:
                # A contextual stop leaves the previous head's evaluation last.
                last_eval = x + m - 1 if gc_new > d else x + m - 2
                protect = _close_run(marks, sign, run_start, last_eval, gc_new, protect, m)
                searching = True
                gc = 0
    if not searching:
        protect = _close_run(marks, sign, run_start, n - 1 + m - 1, gc + m - 1, protect, m)


def link_line(delta, lc, grad, config: LinkerConfig = LinkerConfig()) -> np.ndarray:
    """Run the state machine over one scan line given per-pixel inputs.

    ``grad`` must already be oriented by :func:`polarity`.
    """
    delta = np.ascontiguousarray(delta, dtype=np.float64)
    lc = np.ascontiguousarray(lc, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    marks = np.zeros(delta.shape[0], dtype=np.int8)
    _link_line(delta, lc, grad, int(config.M), int(config.d), float(config.C), marks)
    return marks


@njit(cache=True, nogil=True)
def _link_kernel(delta, lc, grad, offsets, vertical, n_perp, m, d, c_thr, out):
    n_along = offsets.shape[0]
    buf_d = np.empty(n_along)
    buf_l = np.empty(n_along)
    buf_g = np.empty(n_along)
    buf_m = np.zeros(n_along, dtype=np.int8)
    omin = offsets.min()
    omax = offsets.max()
    for c in range(-omax, n_perp - omin):
        first = -1
        last = -1
        for a in range(n_along):
            p = c + offsets[a]
            if 0 <= p < n_perp:
                if first < 0:
                    first = a
                last = a
            elif first >= 0:
                break
        if first < 0:
            continue
        k = last - first + 1
        if k < m:
            continue
        for i in range(k):
            a = first + i
            p = c + offsets[a]
            if vertical:
                buf_d[i] = delta[a, p]
                buf_l[i] = lc[a, p]
                buf_g[i] = grad[a, p]
            else:
                buf_d[i] = delta[p, a]
                buf_l[i] = lc[p, a]
                buf_g[i] = grad[p, a]
            buf_m[i] = 0
        _link_line(buf_d[:k], buf_l[:k], buf_g[:k], m, d, c_thr, buf_m[:k])
        for i in range(k):
            if buf_m[i] != 0:
                a = first + i
                p = c + offsets[a]
                if vertical:
                    out[a, p] = buf_m[i]
                else:
                    out[p, a] = buf_m[i]


def link_direction(context: ContextualField, gradients: GradientStack,
                   config: LinkerConfig = LinkerConfig()) -> SignedEdgeMap:
    """Connected edge map of one direction."""
    direction = context.direction
    grad = gradients[direction.quadrant] * polarity(direction)
    delta = np.ascontiguousarray(context.delta)
    geo = line_geometry(direction, delta.shape)
    out = np.zeros(delta.shape, dtype=np.int8)
    _link_kernel(delta, np.ascontiguousarray(context.lc), np.ascontiguousarray(grad),
                 geo.offsets, geo.vertical, geo.n_perp, int(config.M), int(config.d),
                 float(config.C), out)
    return SignedEdgeMap(out, direction, np.abs(context.delta))
