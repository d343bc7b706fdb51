"""Parametric two-sample machinery for contextual edges.

Two sample windows are summarised as Normal distributions and compared with
the total variation (TV) distance.  Because the TV distance between two
Normals only depends on the normalised mean gap and the standard deviation
ratio, it is tabulated once in a 2-D look-up table and read back with
bilinear interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "SIGMA_FLOOR",
    "NormalParams",
    "NormalizedPair",
    "TvLut",
    "pdf_intersections",
    "tv_distance",
    "tv_distance_array",
    "normalize",
    "normalize_array",
    "build_lut",
    "lut_lookup",
    "t_statistic",
    "equivalent_t_threshold",
]

#: Lower bound applied to sample standard deviations (gray units).
SIGMA_FLOOR = 1e-6

# |a| below this is treated as the equal-variance case.
_QUADRATIC_EPS = 1e-12


@dataclass(frozen=True)
class NormalParams:
    """Mean and standard deviation of a sample window."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_variance(cls, mu: float, var: float) -> "NormalParams":
        return cls(float(mu), math.sqrt(max(float(var), 0.0)))

    def clamped(self, floor: float = SIGMA_FLOOR) -> "NormalParams":
        return NormalParams(self.mu, max(self.sigma, floor))


@dataclass(frozen=True)
class NormalizedPair:
    """Scale-free description of a pair of Normals.

    ``mu_prime`` is the mean gap in units of the smaller standard deviation
    and ``sigma_prime`` the ratio of the larger to the smaller deviation.
    """

    mu_prime: float
    sigma_prime: float


def _cdf(x: float, mu: float, sigma: float) -> float:
    return 0.5 * math.erfc(-(x - mu) / (sigma * math.sqrt(2.0)))


def pdf_intersections(a: NormalParams, b: NormalParams) -> tuple[float, float]:
    """Abscissae where the two densities are equal, sorted ascending.

    Equal variances give one crossing, returned twice (the midpoint of the
    means).  For identical distributions every abscissa is a crossing and the
    midpoint is returned as a representative.
    """
    if a.sigma <= 0 or b.sigma <= 0:
        raise ValueError("both sigmas must be positive")
    va, vb = a.sigma**2, b.sigma**2
    qa = 1.0 / (2 * va) - 1.0 / (2 * vb)
    if abs(qa) < _QUADRATIC_EPS:
        mid = 0.5 * (a.mu + b.mu)
        return mid, mid
    qb = -a.mu / va + b.mu / vb
    qc = a.mu**2 / (2 * va) - b.mu**2 / (2 * vb) - math.log(b.sigma / a.sigma)
    # Unequal variances always cross twice; clip round-off.
    root = math.sqrt(max(qb * qb - 4 * qa * qc, 0.0))
    # Cancellation-free form of the quadratic roots.
    q = -0.5 * (qb + math.copysign(root, qb))
    if q == 0.0:
        x1 = x2 = 0.0
    else:
        x1, x2 = q / qa, qc / q
    return (x1, x2) if x1 <= x2 else (x2, x1)


def tv_distance(a: NormalParams, b: NormalParams) -> float:
    """TV distance between two Normal distributions, in [0, 1].

    The real line is split at the density crossings; on each interval one
    density dominates, so the absolute difference integrates to a difference
    of CDFs.
    """
    if a == b:
        return 0.0
    x1, x2 = pdf_intersections(a, b)
    total = 0.0
    lo = -math.inf
    for hi in (x1, x2, math.inf):
        fa = (_cdf(hi, a.mu, a.sigma) if hi != math.inf else 1.0) - (
            _cdf(lo, a.mu, a.sigma) if lo != -math.inf else 0.0
        )
        fb = (_cdf(hi, b.mu, b.sigma) if hi != math.inf else 1.0) - (
            _cdf(lo, b.mu, b.sigma) if lo != -math.inf else 0.0
        )
        total += abs(fa - fb)
        lo = hi
    return min(max(0.5 * total, 0.0), 1.0)


def tv_distance_array(mu_prime, sigma_prime) -> np.ndarray:
    """Vectorised TV distance between N(0, 1) and N(mu', sigma'^2).

    Requires ``sigma_prime >= 1``; used to fill the look-up table.
    """
    m = np.asarray(mu_prime, dtype=np.float64)
    s = np.asarray(sigma_prime, dtype=np.float64)
    m, s = np.broadcast_arrays(m, s)
    vs = s * s
    qa = 0.5 - 0.5 / vs
    qb = m / vs
    qc = -0.5 * m * m / vs - np.log(s)
    equal = np.abs(qa) < _QUADRATIC_EPS
    safe_a = np.where(equal, 1.0, qa)
    root = np.sqrt(np.maximum(qb * qb - 4 * safe_a * qc, 0.0))
    q = -0.5 * (qb + np.copysign(root, qb))
    safe_q = np.where(q == 0.0, 1.0, q)
    x1 = np.where(q == 0.0, 0.0, q / safe_a)
    x2 = np.where(q == 0.0, 0.0, qc / safe_q)
    mid = 0.5 * m
    x1 = np.where(equal, mid, x1)
    x2 = np.where(equal, mid, x2)
    lo, hi = np.minimum(x1, x2), np.maximum(x1, x2)

    def parts(mu, sigma):
        f_lo = ndtr((lo - mu) / sigma)
        f_hi = ndtr((hi - mu) / sigma)
        return f_lo, f_hi - f_lo, 1.0 - f_hi

    a = parts(0.0, 1.0)
    b = parts(m, s)
    total = sum(np.abs(pa - pb) for pa, pb in zip(a, b))
    out = np.clip(0.5 * total, 0.0, 1.0)
    return out


def normalize(a: NormalParams, b: NormalParams) -> NormalizedPair:
    lo = min(a.sigma, b.sigma)
    hi = max(a.sigma, b.sigma)
    if lo <= 0:
        raise ValueError("sigmas must be clamped to a positive floor first")
    return NormalizedPair(abs(b.mu - a.mu) / lo, hi / lo)


def normalize_array(mu_t, var_t, mu_b, var_b, floor: float = SIGMA_FLOOR):
    """Vectorised :func:`normalize` on variance fields, with sigma flooring."""
    st = np.maximum(np.sqrt(np.maximum(var_t, 0.0)), floor)
    sb = np.maximum(np.sqrt(np.maximum(var_b, 0.0)), floor)
    lo = np.minimum(st, sb)
    hi = np.maximum(st, sb)
    return np.abs(mu_b - mu_t) / lo, hi / lo


@dataclass(frozen=True, eq=False)
class TvLut:
    """Tabulated TV distance on a uniform (mu', sigma') grid.

    ``values[i, j]`` holds the distance at ``mu_axis[i]``, ``sigma_axis[j]``.
    """

    mu_axis: np.ndarray
    sigma_axis: np.ndarray
    values: np.ndarray
    step: float

    @property
    def mu_max(self) -> float:
        return float(self.mu_axis[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.sigma_axis[-1])

    def lookup(self, mu_prime, sigma_prime) -> np.ndarray:
        """Bilinear interpolation, clamping outside the table."""
        step = self.step
        u = np.clip(np.asarray(mu_prime, dtype=np.float64), 0.0, self.mu_max) / step
        v = (np.clip(np.asarray(sigma_prime, dtype=np.float64), 1.0, self.sigma_max) - 1.0) / step
        nu, nv = self.values.shape
        i = np.minimum(np.floor(u).astype(np.intp), nu - 2)
        j = np.minimum(np.floor(v).astype(np.intp), nv - 2)
        fu = u - i
        fv = v - j
        t = self.values
        return (
            t[i, j] * (1 - fu) * (1 - fv)
            + t[i + 1, j] * fu * (1 - fv)
            + t[i, j + 1] * (1 - fu) * fv
            + t[i + 1, j + 1] * fu * fv
        )

    def to_csv(self, path) -> None:
        mu, sig = np.meshgrid(self.mu_axis, self.sigma_axis, indexing="ij")
        rows = np.column_stack([mu.ravel(), sig.ravel(), self.values.ravel()])
        np.savetxt(path, rows, delimiter=",", header="mu_prime,sigma_prime,delta",
                   comments="", fmt="%.10g")


def build_lut(mu_max: float = 8.0, sigma_max: float = 8.0, grid_step: float = 1 / 64) -> TvLut:
    if not (mu_max > 0 and grid_step > 0 and sigma_max >= 1):
        raise ValueError(
            f"invalid LUT grid: mu_max={mu_max}, sigma_max={sigma_max}, step={grid_step}"
        )
    n_mu = int(round(mu_max / grid_step)) + 1
    n_sigma = int(round((sigma_max - 1.0) / grid_step)) + 1
    if n_mu < 2 or n_sigma < 2:
        raise ValueError("LUT grid needs at least two nodes per axis")
    mu_axis = np.arange(n_mu) * grid_step
    sigma_axis = 1.0 + np.arange(n_sigma) * grid_step
    values = tv_distance_array(mu_axis[:, None], sigma_axis[None, :])
    # Monotone in mu' by construction; enforce against round-off.
    values = np.maximum.accumulate(values, axis=0)
    for arr in (mu_axis, sigma_axis, values):
        arr.setflags(write=False)
    return TvLut(mu_axis, sigma_axis, values, float(grid_step))


def lut_lookup(lut: TvLut, p: NormalizedPair) -> float:
    return float(lut.lookup(p.mu_prime, p.sigma_prime))


def t_statistic(a: NormalParams, b: NormalParams, m: int) -> float:
    """Two-sample t statistic for windows of ``m`` samples each."""
    if m < 2:
        raise ValueError("need at least two samples per window")
    var = a.sigma**2 + b.sigma**2
    if var <= 0:
        raise ValueError("t statistic undefined when both variances are zero")
    return (a.mu - b.mu) / math.sqrt(var / m)


def equivalent_t_threshold(c: float, m: int) -> float:
    """|t| threshold matching a TV threshold ``c`` for equal-variance windows.

    With equal variances the TV distance is ``2*Phi(mu'/2) - 1`` and
    ``|t| = mu' * sqrt(m / 2)``.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    mu_prime = 2.0 * float(ndtri(0.5 * (1.0 + c)))
    return mu_prime * math.sqrt(m / 2.0)
