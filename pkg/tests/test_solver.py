import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from nonlocal_layers import solver
from nonlocal_layers.errors import GridTooCoarse, NoSignChange
from nonlocal_layers.fixtures import fixture
from nonlocal_layers.geometry import make_domain
from nonlocal_layers.nonlinearity import NonlocalProblem, ScalarFamily
from nonlocal_layers.solver import (
    average_q,
    boundary_normal_derivatives,
    domain_average,
    make_grid,
    map_derivative,
    solve_local,
    solve_nonlocal,
    tangent_residual,
)

LIN = ScalarFamily("linear", (1.0,))
ONE = ScalarFamily("constant", (1.0,))


def linear_problem(b0=1.0, gamma=0.0):
    return NonlocalProblem(LIN, LIN, ONE, b0, gamma)


def exact_linear(kind, N, r, theta, eps=0.0, gamma=0.0):
    if kind == "interval":
        A = 1 / (math.cosh(0.5 / theta) + eps * gamma * math.sinh(0.5 / theta) / theta)
        return A * np.cosh((r - 0.5) / theta)
    if N == 2:
        return special.i0e(r / theta) * np.exp((r - 1) / theta) / special.i0e(1 / theta)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, np.sinh(r / theta) / safe, 1 / theta) / math.sinh(1 / theta)


@pytest.mark.parametrize("kind,N,gamma", [("interval", 1, 0.0), ("ball", 2, 0.0), ("ball", 3, 0.0), ("interval", 1, 1.0)])
@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_local_solution_matches_closed_form(kind, N, gamma, eps):
    dom = make_domain(kind, N, 1.0)
    grid = make_grid(dom, eps)
    sol = solve_local(linear_problem(gamma=gamma), dom, eps, eps, grid)
    assert np.max(np.abs(sol.v - exact_linear(kind, N, grid.r, eps, eps, gamma))) < 5e-7
    assert sol.residual_norm < 1e-11


def test_grid_refinement_is_second_order():
    dom = make_domain("ball", 2, 1.0)
    errs = []
    for rel in (1 / 100, 1 / 200):
        grid = make_grid(dom, 0.05, rel_spacing=rel)
        v = solve_local(linear_problem(), dom, 0.05, 0.05, grid).v
        errs.append(np.max(np.abs(v - exact_linear("ball", 2, grid.r, 0.05))))
    assert 3.3 < errs[0] / errs[1] < 4.7


def test_grid_shape():
    dom = make_domain("ball", 3, 1.0)
    g = make_grid(dom, 0.05, n=200)
    assert g.n == 201 and g.r[0] == 0.0 and g.r[-1] == 1.0
    assert np.all(np.diff(g.r) > 0)
    assert np.diff(g.r)[-1] < np.diff(g.r)[0]
    iv = make_grid(make_domain("annulus", 2, (1.0, 2.0)), 0.05, n=101)
    assert (iv.r[0], iv.r[-1]) == (1.0, 2.0)
    assert np.allclose(iv.r - 1.5, -(iv.r[::-1] - 1.5))
    # metrics match finite differences of the map
    assert np.allclose(np.gradient(g.r, g.dxi)[5:-5], g.g1[5:-5], rtol=1e-3)


def test_domain_average_quadrature():
    for kind, N, par in (("ball", 2, 1.0), ("ball", 3, 2.0), ("annulus", 2, (1.0, 2.0)), ("interval", 1, 1.0)):
        dom = make_domain(kind, N, par)
        grid = make_grid(dom, 0.05)
        assert domain_average(dom, grid, np.ones(grid.n)) == pytest.approx(1.0, abs=1e-10)
    dom = make_domain("ball", 2, 1.0)
    grid = make_grid(dom, 0.05)
    assert domain_average(dom, grid, grid.r**2) == pytest.approx(0.5, abs=1e-10)


def test_boundary_derivative_stencil():
    dom = make_domain("ball", 2, 1.0)
    grid = make_grid(dom, 0.05)
    assert boundary_normal_derivatives(dom, grid, np.exp(grid.r / 0.05))["outer"] == pytest.approx(
        math.exp(20) / 0.05, rel=1e-6
    )
    iv = make_domain("interval", 1, 1.0)
    g = make_grid(iv, 0.05)
    d = boundary_normal_derivatives(iv, g, g.r**2)
    assert (d["right"], d["left"]) == pytest.approx((2.0, 0.0), abs=1e-8)


def test_zero_boundary_data_gives_zero():
    dom = make_domain("ball", 2, 1.0)
    sol = solve_nonlocal(linear_problem(b0=0.0), dom, 0.05)
    assert not np.any(sol.u) and sol.B_eps == 0.0 and sol.theta_of_eps == 0.05


@settings(max_examples=12)
@given(st.floats(1e-3, 2), st.floats(0, 2), st.sampled_from([0.1, 0.05]))
def test_local_solution_stays_in_box(b0, gamma, eps):
    p = NonlocalProblem(ScalarFamily("cubic", (1.0, 1.0)), LIN, ONE, b0, gamma)
    dom = make_domain("ball", 2, 1.0)
    grid = make_grid(dom, eps, rel_spacing=1 / 100)
    assert solve_local(p, dom, eps, eps, grid).in_box(b0)


def test_constant_diffusion_width_equals_eps():
    p, dom = fixture("FIX-L0")
    sol = solve_nonlocal(p, dom, 0.05)
    assert sol.theta_of_eps == pytest.approx(0.05, rel=1e-13)
    assert sol.map_residual < 1e-14


def test_affine_diffusion_width_ratio():
    p, dom = fixture("FIX-L1")
    sol = solve_nonlocal(p, dom, 0.05)
    ratio = sol.theta_of_eps / 0.05
    assert 1.0 < ratio < 1.5
    assert ratio == pytest.approx(math.sqrt(float(p.A(sol.B_eps))), rel=1e-12)
    assert sol.B_eps == pytest.approx(average_q(p, dom, solve_local(p, dom, sol.theta_of_eps, 0.05, sol.grid)), rel=1e-12)


def test_map_derivative_and_tangent_problem():
    p, dom = fixture("FIX-NL")
    eps = 0.05
    grid = make_grid(dom, eps, A0=p.A0)
    theta = eps * math.sqrt(p.A0)
    dM, dv = map_derivative(p, dom, eps, theta, grid, return_field=True)
    assert dM > 0
    assert np.all(dv >= -1e-8)  # wider layers reach further in
    v = solve_local(p, dom, theta, eps, grid).v
    assert tangent_residual(p, dom, eps, theta, grid, v, dv) < 1e-7
    assert tangent_residual(p, dom, eps, theta, grid, v, 2 * dv) > 100 * tangent_residual(p, dom, eps, theta, grid, v, dv)


def test_grid_too_coarse():
    dom = make_domain("ball", 2, 1.0)
    with pytest.raises(GridTooCoarse):
        solve_local(linear_problem(), dom, 1e-3, 1e-3, make_grid(dom, 0.1, n=21))


def test_no_sign_change(monkeypatch):
    p, dom = fixture("FIX-L0")
    monkeypatch.setattr(solver, "BRACKETS", ((1.2, 1.5),))
    with pytest.raises(NoSignChange):
        solve_nonlocal(p, dom, 0.1)
