import math

import numpy as np
import pytest

from seglink.directions import classify
from seglink.linker import SignedEdgeMap
from seglink.rectangles import (
    Line,
    Rectangle,
    Region,
    angle_diff,
    build_rectangle,
    fit_limit_lines,
    label_regions,
    merge_duplicates,
    rectangles_from_edges,
    validate,
)

D0 = classify(1, 32)


def emap(values, direction=D0):
    values = np.asarray(values, dtype=np.int8)
    return SignedEdgeMap(values, direction, np.full(values.shape, 0.9))


def bar_region(y0=10, y1=12, x0=5, x1=104, sign=1):
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    return Region(1, sign, xs.ravel(), ys.ravel(), D0)


def rect(theta, x0, y0, x1, y1, width=3.0, sign=1, bin=1):
    return Rectangle(theta, x0, y0, x1, y1, width, sign, bin, 0.9)


def test_angle_diff_wraps():
    assert angle_diff(179.0, 1.0) == pytest.approx(-2.0)
    assert angle_diff(1.0, 179.0) == pytest.approx(2.0)
    assert angle_diff(90.0, 0.0) == pytest.approx(-90.0)


def test_label_single_run():
    v = np.zeros((5, 120), dtype=int)
    v[2, 10:110] = 1
    (r,) = label_regions(emap(v), 15)
    assert len(r) == 100 and r.sign == 1


def test_label_staggered_runs_merge():
    v = np.zeros((6, 80), dtype=int)
    v[2, 0:40] = -1
    v[3, 40:80] = -1  # diagonal contact only
    (r,) = label_regions(emap(v), 15)
    assert len(r) == 80


def test_label_opposite_signs_stay_apart():
    v = np.zeros((6, 80), dtype=int)
    v[2, 0:40] = 1
    v[2, 40:80] = -1
    regions = label_regions(emap(v), 15)
    assert sorted((r.sign, len(r)) for r in regions) == [(-1, 40), (1, 40)]


def test_label_drops_small():
    v = np.zeros((6, 80), dtype=int)
    v[2, 0:14] = 1
    assert label_regions(emap(v), 15) == []


def test_fit_perfect_bar():
    upper, lower = fit_limit_lines(bar_region())
    assert upper.angle == pytest.approx(0.0, abs=1e-12) or upper.angle == pytest.approx(180.0)
    assert upper.offset == pytest.approx(10.0) and lower.offset == pytest.approx(12.0)


def test_fit_thin_run_coincident():
    upper, lower = fit_limit_lines(bar_region(y0=7, y1=7))
    assert upper == lower


def test_fit_rotated_bar():
    t = math.tan(math.radians(3.0))
    xs, ys = [], []
    for x in range(0, 150):
        yc = 20 + x * t
        for y in range(int(math.floor(yc - 1.5)), int(math.ceil(yc + 1.5)) + 1):
            if abs(y - yc) <= 1.5:
                xs.append(x)
                ys.append(y)
    region = Region(1, 1, np.array(xs), np.array(ys), D0)
    for line in fit_limit_lines(region):
        assert abs(angle_diff(line.angle, 3.0)) <= 0.5


def test_validate():
    assert validate(Line(0.0, 10), Line(0.0, 12), D0, 32) == 0.0
    d = classify(5, 32)
    assert validate(Line(22.5, 0), Line(22.5, 3), d, 32) == pytest.approx(22.5)
    # limit lines 15 degrees apart are rejected (also with a doubled tolerance)
    assert validate(Line(7.5, 0), Line(172.5, 3), D0, 32) is None
    assert validate(Line(7.5, 0), Line(172.5, 3), D0, 32, tolerance=11.25) is None
    # bin containment: +-90/N around the bin centre
    assert validate(Line(2.8, 0), Line(2.8, 3), D0, 32) == pytest.approx(2.8)
    assert validate(Line(3.0, 0), Line(3.0, 3), D0, 32) is None
    assert validate(Line(177.3, 0), Line(177.3, 3), D0, 32) == pytest.approx(177.3)
    # circular mean across the 0/180 seam
    assert validate(Line(179.0, 0), Line(1.0, 3), D0, 32) in (0.0, pytest.approx(180.0))


def test_build_perfect_bar():
    region = bar_region()
    upper, lower = fit_limit_lines(region)
    theta = validate(upper, lower, D0, 32)
    r = build_rectangle(region, upper, lower, theta)
    assert (r.x0, r.y0, r.x1, r.y1) == pytest.approx((5, 11, 104, 11))
    assert r.width == pytest.approx(3.0) and r.theta == 0.0 and r.bin == 1
    assert isinstance(r.width, float) and math.isnan(r.score)


def test_build_thin_run():
    region = bar_region(y0=4, y1=4, x0=0, x1=14)
    upper, lower = fit_limit_lines(region)
    r = build_rectangle(region, upper, lower, validate(upper, lower, D0, 32))
    assert r.width == pytest.approx(1.0) and r.length == pytest.approx(14.0)


def test_build_rotated_bar_endpoints():
    theta = 2.0
    u = np.array([math.cos(math.radians(theta)), math.sin(math.radians(theta))])
    n = np.array([-u[1], u[0]])
    ys, xs = np.mgrid[0:40, 0:140]
    p = np.stack([xs.ravel(), ys.ravel()], axis=1) - np.array([10.0, 15.0])
    along, across = p @ u, p @ n
    keep = (along >= 0) & (along <= 110) & (np.abs(across) <= 1.5)
    region = Region(1, 1, xs.ravel()[keep], ys.ravel()[keep], D0)
    upper, lower = fit_limit_lines(region)
    r = build_rectangle(region, upper, lower, validate(upper, lower, D0, 32))
    assert abs(angle_diff(r.theta, theta)) < 0.3
    assert math.dist((r.x0, r.y0), (10, 15)) <= 1.0
    end = np.array([10.0, 15.0]) + 110 * u
    assert math.dist((r.x1, r.y1), end) <= 1.0


def test_polarity_is_geometric():
    # Same physical edge (bright above) fitted at 0.5 and 179.5 degrees:
    # the reported sign follows the reported direction.
    bright_above = []
    for theta in (0.5, 179.5):
        v = np.zeros((10, 60), dtype=int)
        v[4, 5:55] = 1
        region = label_regions(emap(v), 15)[0]
        line = Line(theta, 4.0)
        bright_above.append(build_rectangle(region, line, line, theta).sign)
    assert bright_above[0] == -bright_above[1]


def test_corners_and_flip():
    r = rect(0.0, 0, 5, 10, 5, width=2)
    assert r.corners().tolist() == [[0, 6], [10, 6], [10, 4], [0, 4]]
    f = r.flipped(20)
    assert (f.y0, f.y1, f.theta, f.sign) == (14, 14, 0.0, 1)


def test_merge_adjacent_bin_duplicate():
    a = rect(2.7, 0, 10, 100, 14.7, bin=1)
    b = rect(2.9, 1, 10.05, 90, 14.6, bin=2)
    assert merge_duplicates([a, b], 32) == [a]


def test_merge_keeps_crossings_and_disjoint():
    h = rect(0.0, 0, 50, 100, 50)
    v = rect(90.0, 50, 0, 50, 100, bin=17)
    assert len(merge_duplicates([h, v], 32)) == 2
    left = rect(0.0, 0, 10, 40, 10)
    right = rect(0.0, 60, 10, 100, 10)
    assert len(merge_duplicates([left, right], 32)) == 2


def test_merge_respects_polarity_and_wrap():
    a = rect(0.5, 0, 10, 100, 10.9, sign=1)
    b = rect(0.6, 0, 10, 90, 10.9, sign=-1)
    assert len(merge_duplicates([a, b], 32)) == 2  # twins are kept apart
    # 179.6 deg with the opposite label describes the same edge as 0.5 deg
    c = rect(179.6, 90, 10.6, 0, 11.2, sign=-1, bin=32)
    assert merge_duplicates([a, c], 32) == [a]


def test_merge_separation_limit():
    a = rect(0.0, 0, 10, 100, 10, width=3)
    b = rect(0.0, 0, 14, 100, 14, width=3)
    assert len(merge_duplicates([a, b], 32)) == 2


def test_merge_order_independent(rng):
    rects = [rect(float(t), *map(float, rng.uniform(0, 100, 4)), sign=int(s), bin=1)
             for t, s in zip(rng.uniform(0, 10, 30), rng.choice([-1, 1], 30))]
    ref = merge_duplicates(rects, 32)
    for _ in range(5):
        perm = [rects[i] for i in rng.permutation(len(rects))]
        assert merge_duplicates(perm, 32) == ref


def test_rectangles_from_edges_bin_containment():
    v = np.zeros((40, 200), dtype=int)
    for x in range(10, 190):
        v[10 + int(x * math.tan(math.radians(2.0)) + 0.5), x] = 1
        v[20, x] = -1
    out = rectangles_from_edges(emap(v), 32)
    assert len(out) == 2
    for r in out:
        assert abs(angle_diff(r.theta, 0.0)) <= 90 / 32 + 1e-9
        assert r.length + 1 >= 15


def test_rectangles_from_edges_rejects_wedges():
    v = np.zeros((60, 120), dtype=int)
    for x in range(10, 110):
        top = 10 + int(round((x - 10) * math.tan(math.radians(12.0))))
        v[10:top + 1, x] = 1  # lower limit horizontal, upper limit at 12 degrees
    assert rectangles_from_edges(emap(v), 32) == []
