import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from seglink.stats import (
    NormalizedPair,
    NormalParams,
    build_lut,
    equivalent_t_threshold,
    lut_lookup,
    normalize,
    pdf_intersections,
    t_statistic,
    tv_distance,
    tv_distance_array,
)

means = st.floats(-50, 50)
sigmas = st.floats(0.1, 20)


def test_intersections_equal_variance_midpoint(frozen):
    lo, hi = pdf_intersections(NormalParams(0, 1), NormalParams(2, 1))
    assert lo == hi == pytest.approx(frozen["crossing_0_1_vs_2_1"][0], abs=1e-12)


def test_intersections_unequal_variance(frozen):
    got = pdf_intersections(NormalParams(0, 1), NormalParams(0, 2))
    assert got == pytest.approx(frozen["crossing_0_1_vs_0_2"], abs=1e-10)
    assert got[1] == pytest.approx(math.sqrt(8 / 3 * math.log(2)), abs=1e-12)


def test_intersections_are_pdf_crossings():
    a, b = NormalParams(3.0, 2.0), NormalParams(-1.0, 5.0)
    pdf = lambda x, p: math.exp(-((x - p.mu) ** 2) / (2 * p.sigma**2)) / p.sigma
    for x in pdf_intersections(a, b):
        assert pdf(x, a) == pytest.approx(pdf(x, b), rel=1e-9)


def test_tv_identical_is_zero():
    assert tv_distance(NormalParams(5, 3), NormalParams(5, 3)) == 0.0


def test_tv_examples(frozen):
    assert tv_distance(NormalParams(0, 1), NormalParams(2, 1)) == pytest.approx(
        frozen["tv_0_1_vs_2_1"], abs=1e-12)
    assert tv_distance(NormalParams(0, 1), NormalParams(0, 2)) == pytest.approx(
        frozen["tv_0_1_vs_0_2"], abs=1e-10)


def test_tv_against_frozen_quadrature(frozen):
    for mu_a, s_a, mu_b, s_b, want in frozen["tv_samples"]:
        got = tv_distance(NormalParams(mu_a, s_a), NormalParams(mu_b, s_b))
        assert got == pytest.approx(want, abs=1e-10)


def test_tv_array_matches_scalar():
    mp = np.array([0.0, 0.3, 2.0, 7.5])
    sp = np.array([1.0, 1.0, 3.0, 6.2])
    got = tv_distance_array(mp, sp)
    for m, s, g in zip(mp, sp, got):
        assert g == pytest.approx(tv_distance(NormalParams(0, 1), NormalParams(m, s)), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(means, sigmas, means, sigmas)
def test_tv_symmetric_and_bounded(mu_a, s_a, mu_b, s_b):
    a, b = NormalParams(mu_a, s_a), NormalParams(mu_b, s_b)
    ab, ba = tv_distance(a, b), tv_distance(b, a)
    assert 0.0 <= ab <= 1.0
    assert ab == pytest.approx(ba, rel=1e-12, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 20), st.floats(0.1, 30))
def test_equal_variance_closed_form(gap, sigma):
    got = tv_distance(NormalParams(0, sigma), NormalParams(gap, sigma))
    want = ndtr(gap / (2 * sigma)) - ndtr(-gap / (2 * sigma))
    assert got == pytest.approx(want, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(1, 8))
def test_tv_monotone_in_mean_gap(sp):
    mus = np.linspace(0, 8, 200)
    vals = tv_distance_array(mus, np.full_like(mus, sp))
    assert np.all(np.diff(vals) >= -1e-12)


def test_normalize_examples():
    assert normalize(NormalParams(10, 2), NormalParams(16, 4)) == NormalizedPair(3.0, 2.0)
    assert normalize(NormalParams(7, 2), NormalParams(7, 2)) == NormalizedPair(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(means, sigmas, means, sigmas, st.floats(-100, 100), st.floats(0.05, 20))
def test_normalize_shift_scale_invariant(mu_t, s_t, mu_b, s_b, c, k):
    a, b = NormalParams(mu_t, s_t), NormalParams(mu_b, s_b)
    ref = normalize(a, b)
    assert normalize(b, a) == ref
    a2 = NormalParams(mu_t + c, k * s_t)
    b2 = NormalParams(mu_t + c + k * (mu_b - mu_t), k * s_b)
    got = normalize(a2, b2)
    assert got.mu_prime == pytest.approx(ref.mu_prime, rel=1e-9, abs=1e-9)
    assert got.sigma_prime == pytest.approx(ref.sigma_prime, rel=1e-12)


def test_normalize_needs_clamped_sigmas():
    a, b = NormalParams(0, 0), NormalParams(1, 0)
    with pytest.raises(ValueError):
        normalize(a, b)
    p = normalize(a.clamped(), b.clamped())
    assert p.mu_prime == pytest.approx(1e6) and p.sigma_prime == 1.0


def test_lut_nodes_and_monotone(lut, frozen):
    assert lut.values[0, 0] == 0.0
    assert np.all((lut.values >= 0) & (lut.values <= 1))
    assert np.all(np.diff(lut.values, axis=0) >= 0)
    i = int(round(2.0 / lut.step))
    assert lut.values[i, 0] == pytest.approx(frozen["tv_0_1_vs_2_1"], abs=1e-12)
    assert lut_lookup(lut, NormalizedPair(2.0, 1.0)) == pytest.approx(frozen["tv_0_1_vs_2_1"], abs=1e-3)
    for i, j in [(0, 0), (17, 3), (300, 200), (len(lut.mu_axis) - 1, len(lut.sigma_axis) - 1)]:
        assert lut.lookup(lut.mu_axis[i], lut.sigma_axis[j]) == lut.values[i, j]


def test_lut_clamps_outside(lut):
    assert lut.lookup(100.0, 1.0) == lut.values[-1, 0]
    assert lut.lookup(0.0, 50.0) == lut.values[0, -1]


@pytest.mark.parametrize("args", [(0, 8, 0.1), (8, 0.5, 0.1), (8, 8, 0), (8, 8, -1)])
def test_build_lut_rejects_bad_grid(args):
    with pytest.raises(ValueError):
        build_lut(*args)


def test_lut_csv(tmp_path):
    small = build_lut(1.0, 2.0, 0.5)
    path = tmp_path / "lut.csv"
    small.to_csv(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (3 * 3, 3)
    assert rows[0].tolist() == [0.0, 1.0, 0.0]


def test_t_statistic_examples():
    assert t_statistic(NormalParams(4, 1), NormalParams(4, 3), 15) == 0.0
    a, b = NormalParams(3, math.sqrt(2)), NormalParams(0, math.sqrt(2))
    assert t_statistic(a, b, 16) == pytest.approx(6.0, rel=1e-12)
    k = 3.5
    scaled = t_statistic(NormalParams(3, k * a.sigma), NormalParams(0, k * b.sigma), 16)
    assert scaled == pytest.approx(6.0 / k, rel=1e-12)


def test_t_statistic_errors():
    with pytest.raises(ValueError):
        t_statistic(NormalParams(1, 0), NormalParams(0, 0), 15)
    with pytest.raises(ValueError):
        t_statistic(NormalParams(1, 1), NormalParams(0, 1), 1)


def test_equivalent_t_threshold(frozen):
    assert equivalent_t_threshold(0.7, 15) == pytest.approx(frozen["t_threshold_C07_M15"], rel=1e-12)
