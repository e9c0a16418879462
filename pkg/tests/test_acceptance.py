"""Acceptance criteria 1-10; one summary line per criterion is printed at the end of the run."""

import time
from contextlib import contextmanager

import numpy as np

from conftest import ACCEPTANCE_LINES
from nonlocal_layers.asymptotics import B_coefficients
from nonlocal_layers.fixtures import FIXTURE_NAMES, fixture
from nonlocal_layers.geometry import make_domain, tube_volume
from nonlocal_layers.profiles import build_profiles
from nonlocal_layers.verification import (
    DEFAULT_EPS,
    PROFILE_TOLERANCES,
    CheckSpec,
    fit_order,
    profile_identity_residuals,
    run_check,
    weyl_remainders,
)


@contextmanager
def criterion(number, text):
    detail = {}
    t0 = time.perf_counter()
    ok = False
    try:
        yield detail
        ok = True
    finally:
        dt = time.perf_counter() - t0
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        ACCEPTANCE_LINES.append(
            f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {text} ({dt:.2f}s{', ' + extra if extra else ''})"
        )


def _fmt(x):
    return f"{x:.3g}"


def test_criterion_01_closed_form_oracle():
    with criterion(1, "linear closed forms on FIX-L0") as d:
        t0 = time.perf_counter()
        p, dom = fixture("FIX-L0")
        pr = build_profiles(p)
        c = B_coefficients(p, pr, dom)
        elapsed = time.perf_counter() - t0
        t = pr.t_grid
        errs = (
            np.max(np.abs(pr.W - np.exp(-t))),
            np.max(np.abs(pr.Phi + 0.5 * t * np.exp(-t))),
            np.max(np.abs(pr.Psi - 0.5 * t * np.exp(-t))),
        )
        d["W,Phi,Psi err"] = "/".join(map(_fmt, errs))
        assert errs[0] < 1e-8 and errs[1] < 1e-7 and errs[2] < 1e-7
        got = (c.b_star, c.QF_bstar, c.I_WPhi, c.J_WPsi, c.B1, c.B2)
        want = (1.0, 1.0, -0.5, 0.5, 2.0, -1.0)
        d["coef err"] = _fmt(max(abs(a - b) for a, b in zip(got, want)))
        assert max(abs(a - b) for a, b in zip(got, want)) < 1e-8
        assert elapsed < 1.0


def test_criterion_02_robin_closed_form():
    with criterion(2, "Robin closed form on FIX-LG") as d:
        t0 = time.perf_counter()
        p, _ = fixture("FIX-LG")
        pr = build_profiles(p)
        elapsed = time.perf_counter() - t0
        d["b*"] = repr(pr.b_star)
        d["Phi(0)"] = repr(float(pr.Phi[0]))
        assert abs(pr.b_star - 0.5) < 1e-10
        assert abs(pr.Phi[0] + 0.125) < 1e-10
        assert elapsed < 1.0


def test_criterion_03_04_interior_rates(runs):
    slopes = {}
    t0 = time.perf_counter()
    try:
        with criterion(3, "leading-order rate on FIX-L0, FIX-NL in [0.75, 1.25]") as d:
            for name in ("FIX-L0", "FIX-NL"):
                run = runs[name]
                run.solve_all(DEFAULT_EPS)
                res = [run.leading_residual(e) for e in DEFAULT_EPS]
                slopes[name] = fit_order(list(zip(DEFAULT_EPS, res)))
                d[name] = _fmt(slopes[name])
            assert all(0.75 <= s <= 1.25 for s in slopes.values())
            assert time.perf_counter() - t0 < 60.0
    finally:
        with criterion(4, "refined rate in [1.7, 2.5] and >= leading + 0.5") as d:
            for name in ("FIX-L0", "FIX-NL"):
                run = runs[name]
                res = [run.refined_residual(e) for e in DEFAULT_EPS]
                s = fit_order(list(zip(DEFAULT_EPS, res)))
                d[name] = _fmt(s)
                assert 1.7 <= s <= 2.5
                assert s >= slopes[name] + 0.5


def test_criterion_05_nonlocal_expansion(runs):
    with criterion(5, "average expansion on FIX-L1") as d:
        run = runs["FIX-L1"]
        run.solve_all(DEFAULT_EPS)
        c = run.coeffs
        B = {e: run.solution(e).B_eps for e in DEFAULT_EPS}
        first = [abs(B[e] - c.q0 - e * c.B1) for e in DEFAULT_EPS]
        s = fit_order(list(zip(DEFAULT_EPS, first)))
        scaled = [abs(B[e] - c.q0 - e * c.B1 - e**2 * c.B2) / e**2 for e in DEFAULT_EPS]
        d["order"] = _fmt(s)
        d["eps^2 ratio"] = _fmt(scaled[-1] / scaled[0])
        assert 1.7 <= s <= 2.3
        assert scaled[-1] < 0.5 * scaled[0]


def test_criterion_06_boundary_flux(runs):
    with criterion(6, "boundary derivative on FIX-L1 against 1/eps - 3/2") as d:
        run = runs["FIX-L1"]
        run.solve_all(DEFAULT_EPS)
        res = [abs(run.solution(e).dnu_boundary - (1 / e - 1.5)) for e in DEFAULT_EPS]
        d["residuals"] = "/".join(map(_fmt, res))
        assert all(b < a for a, b in zip(res, res[1:]))
        assert res[-1] < 0.1


def test_criterion_07_uniqueness_window(runs):
    with criterion(7, "consistency map monotone with one root; wide scan on FIX-NL") as d:
        bad = []
        for name in FIXTURE_NAMES:
            r = run_check(CheckSpec("map_monotone", name, wide_scan=name == "FIX-NL"), runs[name])
            d[name] = "min dM=" + _fmt(min(r.residuals["min_dM_dtheta"]))
            if name == "FIX-NL":
                d["wide"] = r.residuals["wide_scan_sign_changes"]
            if not r.passed:
                bad.append(name)
        assert not bad, bad


def test_criterion_08_profile_identities(runs):
    with criterion(8, "profile identity suite on all fixtures") as d:
        worst = {}
        for name in FIXTURE_NAMES:
            res = profile_identity_residuals(runs[name].p, runs[name].profiles)
            for k, v in res.items():
                worst[k] = max(worst.get(k, 0.0), v)
        d["first_integral"] = _fmt(worst["first_integral"])
        d["ode"] = _fmt(max(worst["phi_ode"], worst["psi_ode"]))
        d["moments"] = _fmt(max(worst[f"moment_{j}"] for j in range(3)))
        assert worst["first_integral"] < 1e-9
        assert worst["phi_ode"] < 1e-8 and worst["psi_ode"] < 1e-8
        assert all(worst[f"moment_{j}"] < 1e-7 for j in range(3))
        assert worst["W_envelope_excess"] == 0.0
        assert worst.get("Phi_envelope_excess", 0.0) <= PROFILE_TOLERANCES["Phi_envelope_excess"]


def test_criterion_09_geometry():
    with criterion(9, "Weyl slope, disk tube volume, shape-ratio scale invariance") as d:
        ds, rem = weyl_remainders(make_domain("ball", 3, 1.0))
        s = fit_order(list(zip(ds, rem)))
        d["weyl slope"] = _fmt(s)
        assert s >= 2.7
        disk = make_domain("ball", 2, 1.0)
        for depth in np.linspace(0.01, 0.9, 12) * disk.d_star:
            exact, w2 = tube_volume(disk, depth)
            assert abs(exact - w2) < 1e-14
        for N in (2, 3):
            ratios = [make_domain("ball", N, R).shape_ratio for R in (0.5, 1.0, 3.0)]
            assert max(ratios) - min(ratios) < 1e-14
        ann = [make_domain("annulus", 3, (k, 2.5 * k)).shape_ratio for k in (0.5, 1.0, 4.0)]
        assert max(ann) - min(ann) < 1e-14


def test_criterion_10_decay(runs):
    with criterion(10, "deepest |u| < 1e-6 at eps = 0.025") as d:
        vals = {}
        for name in FIXTURE_NAMES:
            sol = runs[name].solution(0.025)
            delta = runs[name].dom.distance(sol.grid.r)
            vals[name] = abs(float(sol.u[np.argmax(delta)]))
        d.update({k: _fmt(v) for k, v in vals.items()})
        assert all(v < 1e-6 for v in vals.values())
