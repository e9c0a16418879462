import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_layers.errors import BadDimension, DepthOutOfRange
from nonlocal_layers.geometry import coarea_integral, curvature_at_depth, make_domain, tube_volume
from nonlocal_layers.verification import fit_order, weyl_remainders


def test_disk_measures():
    d = make_domain("ball", 2, 1.0)
    assert (d.vol, d.surf, d.H_int) == pytest.approx((math.pi, 2 * math.pi, 2 * math.pi))
    assert d.d_star == pytest.approx(1 / 3)


def test_interval_measures():
    d = make_domain("interval", 1, 1.0)
    assert (d.vol, d.surf, d.H_int) == (1.0, 2.0, 0.0)
    assert d.d_star == 0.5


def test_sphere_measures():
    d = make_domain("ball", 3, 2.0)
    assert d.vol == pytest.approx(32 * math.pi / 3)
    assert d.surf == pytest.approx(16 * math.pi)
    assert curvature_at_depth(d, 0.0) == 0.5


def test_annulus_measures_and_curvature_convention():
    d = make_domain("annulus", 2, (1.0, 3.0))
    assert d.vol == pytest.approx(8 * math.pi)
    assert d.surf == pytest.approx(8 * math.pi)
    assert d.H_int == pytest.approx(0.0)  # 2 pi (1 - 1)
    assert d.d0 == 1.0 and d.d_star == pytest.approx(1 / 3)
    assert curvature_at_depth(d, 0.2, "inner") == pytest.approx(-1 / 1.2)
    assert curvature_at_depth(d, 0.2, "outer") == pytest.approx(1 / 2.8)


def test_bad_dimensions():
    with pytest.raises(BadDimension):
        make_domain("interval", 2, 1.0)
    with pytest.raises(BadDimension):
        make_domain("ball", 1, 1.0)
    with pytest.raises(BadDimension):
        make_domain("annulus", 1, (1.0, 2.0))
    with pytest.raises(ValueError):
        make_domain("annulus", 2, (2.0, 1.0))


def test_curvature_examples():
    disk = make_domain("ball", 2, 1.0)
    assert curvature_at_depth(disk, 0.25) == pytest.approx(4 / 3)
    assert curvature_at_depth(make_domain("interval", 1, 1.0), 0.3) == 0.0
    assert curvature_at_depth(make_domain("ball", 3, 1.0), 0.0) == 1.0
    with pytest.raises(DepthOutOfRange):
        curvature_at_depth(disk, 0.5)
    with pytest.raises(DepthOutOfRange):
        curvature_at_depth(disk, -0.1)


def test_tube_examples():
    disk = make_domain("ball", 2, 1.0)
    exact, w2 = tube_volume(disk, 0.1)
    assert exact == pytest.approx(0.19 * math.pi, abs=1e-14)
    assert w2 == pytest.approx(0.19 * math.pi, abs=1e-14)
    ball = make_domain("ball", 3, 1.0)
    exact, w2 = tube_volume(ball, 0.1)
    assert exact == pytest.approx(4 * math.pi / 3 * (1 - 0.729))
    assert w2 == pytest.approx(0.1 * 4 * math.pi - 0.01 * 4 * math.pi)
    assert exact - w2 == pytest.approx(4 * math.pi / 3 * 1e-3)  # (4 pi/3) d^3


def test_weyl_slopes():
    ds, rem = weyl_remainders(make_domain("ball", 3, 1.0))
    assert fit_order(list(zip(ds, rem))) == pytest.approx(3.0, abs=0.05)
    _, rem = weyl_remainders(make_domain("ball", 2, 1.0))
    assert max(rem) < 1e-14


def test_coarea_examples():
    disk = make_domain("ball", 2, 1.0)
    exact, expanded = coarea_integral(disk, lambda x: x, 0.2)
    assert exact == pytest.approx(2 * math.pi * (0.02 - 0.008 / 3), rel=1e-12)
    assert exact == pytest.approx(expanded, rel=1e-12)  # flat Jacobian in 2D is linear
    iv = make_domain("interval", 1, 1.0)
    assert coarea_integral(iv, lambda x: x, 0.2) == pytest.approx((0.04, 0.04))
    for dom in (disk, make_domain("ball", 3, 1.0), make_domain("annulus", 3, (1.0, 2.0))):
        d = 0.8 * dom.d_star
        assert coarea_integral(dom, lambda x: 1.0 + 0 * x, d) == pytest.approx(tube_volume(dom, d), rel=1e-12)


def test_coarea_tabulated_matches_callable():
    ball = make_domain("ball", 3, 1.5)
    x = np.linspace(0, 0.2, 201)
    tab = coarea_integral(ball, (x, np.exp(-x / 0.05)), 0.2)
    fun = coarea_integral(ball, lambda s: np.exp(-s / 0.05), 0.2)
    assert tab == pytest.approx(fun, rel=1e-7)


def test_coarea_remainder_is_third_order():
    ball = make_domain("ball", 3, 1.0)
    ds = [0.2, 0.1, 0.05, 0.025]
    rem = [abs(np.subtract(*coarea_integral(ball, lambda x: 1 + x, d))) for d in ds]
    assert fit_order(list(zip(ds, rem))) > 2.7


@given(st.integers(2, 6), st.floats(0.1, 10), st.floats(1.5, 5))
def test_shape_ratio_is_scale_invariant(N, R, k):
    a = make_domain("ball", N, R)
    b = make_domain("ball", N, k * R)
    assert a.shape_ratio == pytest.approx(b.shape_ratio, rel=1e-14, abs=1e-14)
    assert a.shape_ratio == pytest.approx(1.0 / N, rel=1e-14)


@given(st.integers(2, 6), st.floats(0.1, 10))
def test_ball_invariants(N, R):
    d = make_domain("ball", N, R)
    assert d.surf == pytest.approx(N * d.vol / R, rel=1e-14)
    assert d.d_star == pytest.approx(min(R, 1 / (1 + 2 / R)))
    assert curvature_at_depth(d, 0.0) == pytest.approx(1 / R)


@given(st.floats(0.05, 3), st.floats(0.01, 0.99))
def test_disk_tube_formula_exact(R, frac):
    d = make_domain("ball", 2, R)
    exact, w2 = tube_volume(d, frac * d.d_star)
    assert abs(exact - w2) <= 1e-14 * max(1.0, d.vol)


@given(st.floats(0.5, 2), st.floats(0.1, 2), st.integers(2, 4))
def test_annulus_tube_matches_coarea(Ri, width, N):
    d = make_domain("annulus", N, (Ri, Ri + width))
    depth = 0.5 * d.d_star
    assert tube_volume(d, depth)[0] == pytest.approx(coarea_integral(d, lambda x: 1.0 + 0 * x, depth)[0], rel=1e-12)
