"""Convergence-order and identity checks over sweeps of eps."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .asymptotics import (
    B_coefficients,
    interior_field,
    predict_B,
    predict_boundary,
)
from .errors import DegenerateFit, NonlocalLayersError
from .fixtures import fixture
from .geometry import DomainGeometry, tube_volume
from .nonlinearity import NonlocalProblem, g_values
from .profiles import build_profiles, layer_moment, phi_initial, psi_initial
from .solver import (
    BRACKETS,
    consistency_map,
    make_grid,
    map_derivative,
    solve_nonlocal,
)

DEFAULT_EPS = (0.1, 0.05, 0.025, 0.0125)
EXACT_FLOOR = 1e-14
THREADS_ENV = "NLBL_THREADS"

CHECKS = (
    "leading_order",
    "refined_interior",
    "B_first_order",
    "B_second_order",
    "boundary_u",
    "boundary_dnu",
    "interior_dnu",
    "decay",
    "map_monotone",
    "profile_identities",
    "weyl",
)


def fit_order(pairs) -> float:
    """Least-squares slope of log(residual) against log(eps).

    Returns +inf when every residual is below 1e-14 (the exact sentinel).
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise DegenerateFit(f"need at least 3 (eps, residual) pairs, got {len(pairs)}")
    eps = np.array([e for e, _ in pairs], dtype=float)
    res = np.array([r for _, r in pairs], dtype=float)
    if np.all(np.abs(res) < EXACT_FLOOR):
        return math.inf
    if np.any(res <= 0) or np.any(eps <= 0):
        raise DegenerateFit("residuals and eps must be positive for a log-log fit")
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    return float(slope)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return min(4, os.cpu_count() or 1)


@dataclass
class CheckSpec:
    name: str
    fixture: str
    eps_list: tuple[float, ...] = DEFAULT_EPS
    band: tuple[float, float] | None = None
    wide_scan: bool = False
    grid_n: int | None = None


@dataclass
class SweepResult:
    check: str
    fixture: str
    eps_list: list[float]
    residuals: dict[str, list[float]]
    fitted_orders: dict[str, float]
    band: tuple[float, float] | None
    passed: bool
    notes: list[str] = field(default_factory=list)

    @property
    def fitted_order(self) -> float | None:
        return self.fitted_orders.get(self.check)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "fixture": self.fixture,
            "eps_list": self.eps_list,
            "residuals": self.residuals,
            "fitted_order": _json_num(self.fitted_order),
            "fitted_orders": {k: _json_num(v) for k, v in self.fitted_orders.items()},
            "band": None if self.band is None else [_json_num(x) for x in self.band],
            "pass": self.passed,
            "notes": self.notes,
        }


def _json_num(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class FixtureRun:
    """Lazily computed profiles, coefficients and solutions for one problem."""

    def __init__(self, problem: NonlocalProblem, dom: DomainGeometry, name: str = "custom", grid_n=None):
        self.p, self.dom, self.name, self.grid_n = problem, dom, name, grid_n
        self._solutions: dict[float, object] = {}

    @classmethod
    def from_fixture(cls, name: str, grid_n=None) -> "FixtureRun":
        p, dom = fixture(name)
        return cls(p, dom, name, grid_n)

    @cached_property
    def profiles(self):
        return build_profiles(self.p)

    @cached_property
    def coeffs(self):
        return B_coefficients(self.p, self.profiles, self.dom)

    def grid(self, eps):
        return make_grid(self.dom, eps, n=self.grid_n, A0=self.p.A0)

    def solution(self, eps: float):
        if eps not in self._solutions:
            self._solutions[eps] = solve_nonlocal(self.p, self.dom, eps, self.grid(eps), self.profiles)
        return self._solutions[eps]

    def solve_all(self, eps_list) -> None:
        todo = [e for e in eps_list if e not in self._solutions]
        self.profiles  # build once before fanning out
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            for e, sol in zip(todo, pool.map(lambda e: solve_nonlocal(
                self.p, self.dom, e, self.grid(e), self.profiles), todo)):
                self._solutions[e] = sol

    # -- geometry of the nodes --------------------------------------------------

    def node_depth_and_kappa(self, sol):
        r = sol.grid.r
        dom = self.dom
        delta = dom.distance(r)
        if dom.kind == "ball":
            kappa = np.full_like(r, dom.components[0].kappa)
        elif dom.kind == "annulus":
            Ri, Ro = dom.params
            outer = r >= 0.5 * (Ri + Ro)
            kappa = np.where(outer, 1.0 / Ro, -1.0 / Ri)
        else:
            kappa = np.zeros_like(r)
        return delta, kappa

    # -- residuals ----------------------------------------------------------------

    def leading_residual(self, eps):
        sol = self.solution(eps)
        delta, _ = self.node_depth_and_kappa(sol)
        W = self.profiles("W", delta / eps)
        return float(np.max(np.abs(sol.u - W)))

    def refined_residual(self, eps):
        sol = self.solution(eps)
        delta, kappa = self.node_depth_and_kappa(sol)
        inside = delta <= self.dom.d_star
        u_pred, _ = interior_field(
            self.p, self.profiles, self.coeffs, self.dom, eps,
            delta[inside], kappa[inside], B_eps_measured=sol.B_eps,
        )
        return float(np.max(np.abs(sol.u[inside] - u_pred)))

    def B_first_residual(self, eps):
        c = self.coeffs
        return abs(self.solution(eps).B_eps - c.q0 - eps * c.B1)

    def B_second_residual(self, eps):
        return abs(self.solution(eps).B_eps - predict_B(self.coeffs, eps))

    def _boundary(self, eps, key):
        sol = self.solution(eps)
        out = []
        for comp, u_b in sol.u_components.items():
            u_pred, dnu_pred, G = predict_boundary(self.p, self.profiles, self.coeffs, self.dom, eps, comp)
            if key == "u":
                D_term = (u_pred - self.coeffs.b_star) / eps
                out.append(abs((u_b - self.coeffs.b_star) / eps - D_term))
            else:
                out.append(abs(sol.dnu_components[comp] - dnu_pred))
        return float(max(out))

    def boundary_u_residual(self, eps):
        return self._boundary(eps, "u")

    def boundary_dnu_residual(self, eps):
        return self._boundary(eps, "dnu")

    def interior_dnu_residual(self, eps):
        """Gradient mismatch at depth eps along the outer (right) boundary."""
        sol = self.solution(eps)
        g = sol.grid
        dv = np.gradient(sol.u, g.dxi) / g.g1
        hi = g.r[-1]
        r0 = hi - eps
        measured = float(np.interp(r0, g.r, dv))
        kappa = 0.0 if self.dom.N == 1 else self.dom.components[0].kappa
        _, dnu = interior_field(
            self.p, self.profiles, self.coeffs, self.dom, eps, eps, kappa, B_eps_measured=None
        )
        return abs(measured - float(dnu))

    def decay_rate(self, eps):
        """Exponential rate of |u| against depth/eps inside the collar.

        The radial amplitude factor r^((N-1)/2) is divided out so the fit sees
        the pure exponential; nodes deeper than d0/2 are excluded.
        """
        sol = self.solution(eps)
        delta, _ = self.node_depth_and_kappa(sol)
        r = sol.grid.r
        u = np.abs(sol.u)
        b = max(self.p.b0, 1e-300)
        deepest = float(u[np.argmax(delta)])
        sel = (delta >= 2 * eps) & (delta <= 0.5 * self.dom.d0) & (u > 1e-12 * b)
        if np.count_nonzero(sel) < 5:
            return float("nan"), deepest
        amp = r[sel] ** (0.5 * (self.dom.N - 1)) if self.dom.N > 1 else 1.0
        slope = np.polyfit(delta[sel] / eps, np.log(u[sel] * amp), 1)[0]
        return float(-slope), deepest

    def map_samples(self, eps, n_deriv: int = 5, n_sign: int = 21):
        """dM/dtheta at bracket samples and the number of sign changes of M."""
        scale = eps * math.sqrt(self.p.A0)
        lo, hi = BRACKETS[0]
        grid = self.grid(eps)
        thetas = np.linspace(lo, hi, n_deriv) * scale
        derivs = [map_derivative(self.p, self.dom, eps, t, grid, profile=self.profiles) for t in thetas]
        ts = np.linspace(lo, hi, n_sign) * scale
        M = [consistency_map(self.p, self.dom, eps, t, grid, profile=self.profiles) for t in ts]
        return np.array(derivs), _sign_changes(M)

    def wide_scan(self, eps, n: int = 200):
        thetas = np.geomspace(1e-3 * eps, 10 * eps, n)
        M = []
        for t in thetas:
            grid = make_grid(self.dom, t / math.sqrt(self.p.A0), A0=self.p.A0, rel_spacing=1.0 / 100)
            M.append(consistency_map(self.p, self.dom, eps, t, grid, profile=self.profiles))
        return _sign_changes(M)


def _sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


# -- profile identities ---------------------------------------------------------


def _d_ds(y, ds):
    # sixth-order central differences, one-sided stencils near the ends
    y = np.asarray(y, dtype=float)
    d = np.empty_like(y)
    c = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
    d[3:-3] = sum(c[k] * y[k : len(y) - 6 + k] for k in range(7)) / ds
    fwd = np.array([-147, 360, -450, 400, -225, 72, -10]) / 60.0
    for i in range(3):
        d[i] = fwd @ y[i : i + 7] / ds
        d[-1 - i] = -(fwd @ y[-1 - i : -8 - i : -1]) / ds
    return d


def profile_identity_residuals(p: NonlocalProblem, prof) -> dict[str, float]:
    """Residuals of the profile equations and identities; all should be tiny."""
    out = {}
    W, t = prof.W, prof.t_grid
    A0 = prof.A0
    rA = math.sqrt(A0)
    out["first_integral"] = float(np.max(np.abs(prof.Wp + p.sqrt_2F(W) / rA)))
    jac = prof.dt_ds
    k = np.where(W > 0, p.damping(np.maximum(W, 1e-300)), 0.0)
    sr = np.sqrt(p.f.half_sq_ratio(W))
    src_phi = -0.5 * rA * W * sr
    G = g_values(p, W)
    with np.errstate(divide="ignore", invalid="ignore"):
        src_psi = np.where(W > 0, rA * G / np.where(W > 0, W * sr, 1.0), 0.0)
    dPhi = _d_ds(prof.Phi, prof.ds) / jac
    dPsi = _d_ds(prof.Psi, prof.ds) / jac
    out["phi_ode"] = float(np.max(np.abs(dPhi + k * prof.Phi - src_phi)))
    out["psi_ode"] = float(np.max(np.abs(dPsi + k * prof.Psi - src_psi)))
    out["phi_robin"] = abs(prof.Phi[0] - p.gamma * prof.Phip[0]) if prof.b_star > 0 else 0.0
    out["psi_robin"] = abs(prof.Psi[0] - p.gamma * prof.Psip[0]) if prof.b_star > 0 else 0.0
    out["phi_initial"] = abs(prof.Phi[0] - phi_initial(p, prof.b_star))
    out["psi_initial"] = abs(prof.Psi[0] - psi_initial(p, prof.b_star))
    for j in range(3):
        lhs, rhs = layer_moment(p, prof, j, "q_of_W_minus_q0")
        out[f"moment_{j}"] = abs(lhs - rhs)
    env_w = W - prof.b_star * np.exp(-prof.M0 * t)
    out["W_envelope_excess"] = float(max(0.0, np.max(env_w / np.maximum(prof.b_star, 1e-300)) - 1e-12))
    if prof.C_hat is not None:
        env_phi = np.abs(prof.Phi) - prof.C_hat * np.exp(-prof.M_tilde * t)
        out["Phi_envelope_excess"] = float(max(0.0, np.max(env_phi)))
    return out


PROFILE_TOLERANCES = {
    "first_integral": 1e-9,
    "phi_ode": 1e-8,
    "psi_ode": 1e-8,
    "phi_robin": 1e-12,
    "psi_robin": 1e-12,
    "phi_initial": 1e-12,
    "psi_initial": 1e-12,
    "moment_0": 1e-7,
    "moment_1": 1e-7,
    "moment_2": 1e-7,
    "W_envelope_excess": 0.0,
    "Phi_envelope_excess": 0.0,
}


def weyl_remainders(dom: DomainGeometry, factors=(0.2, 0.1, 0.05, 0.025)):
    ds = [f * dom.d_star for f in factors]
    rem = []
    for d in ds:
        exact, w2 = tube_volume(dom, d)
        rem.append(abs(exact - w2))
    return ds, rem


# -- checks -----------------------------------------------------------------------


def _structurally_exact(p: NonlocalProblem, dom: DomainGeometry) -> bool:
    # no first-order correction: constant diffusion and a flat boundary
    return p.A0_prime == 0 and dom.N == 1


def default_band(name: str, run: FixtureRun) -> tuple[float, float] | None:
    exact = _structurally_exact(run.p, run.dom)
    if name == "leading_order":
        return (0.75, math.inf if exact else 1.25)
    if name == "refined_interior":
        return (1.7, math.inf if exact else 2.5)
    if name == "B_first_order":
        c = run.coeffs
        return (1.7, math.inf if abs(c.B2) < 1e-12 else 2.3)
    return None


def run_check(spec: CheckSpec, run: FixtureRun | None = None) -> SweepResult:
    """Evaluate one named check over the eps grid of ``spec``."""
    if run is None:
        run = FixtureRun.from_fixture(spec.fixture, spec.grid_n)
    eps_list = sorted(spec.eps_list, reverse=True)
    name = spec.name
    band = spec.band if spec.band is not None else default_band(name, run)
    notes: list[str] = []
    residuals: dict[str, list[float]] = {}
    fitted: dict[str, float] = {}

    needs_solutions = name not in ("profile_identities", "weyl", "map_monotone")
    if needs_solutions and run.p.b0 > 0:
        try:
            run.solve_all(eps_list)
        except NonlocalLayersError as exc:
            notes.append(f"sweep aborted: {exc}")
            return SweepResult(name, run.name, eps_list, {}, {}, band, False, notes)

    def order_check(fn, exact_tol: float = 1e-9):
        vals = [fn(e) for e in eps_list]
        residuals[name] = vals
        try:
            slope = fit_order(list(zip(eps_list, vals)))
        except DegenerateFit:
            slope = float("nan")
        fitted[name] = slope
        if band is not None and math.isinf(band[1]) and max(vals) < exact_tol:
            notes.append("next-order term vanishes; residual at discretisation floor")
            return True
        return band is not None and band[0] <= slope <= band[1]

    if name == "leading_order":
        passed = order_check(run.leading_residual)
    elif name == "refined_interior":
        passed = order_check(run.refined_residual)
    elif name == "B_first_order":
        passed = order_check(run.B_first_residual)
    elif name == "B_second_order":
        vals = [run.B_second_residual(e) for e in eps_list]
        scaled = [v / e**2 for v, e in zip(vals, eps_list)]
        residuals[name] = vals
        residuals["scaled_by_eps2"] = scaled
        try:
            fitted[name] = fit_order(list(zip(eps_list, vals)))
        except DegenerateFit:
            fitted[name] = float("nan")
        passed = scaled[-1] < 0.5 * scaled[0] or max(vals) < 1e-9
    elif name in ("boundary_u", "boundary_dnu", "interior_dnu"):
        fn = {
            "boundary_u": run.boundary_u_residual,
            "boundary_dnu": run.boundary_dnu_residual,
            "interior_dnu": run.interior_dnu_residual,
        }[name]
        vals = [fn(e) for e in eps_list]
        residuals[name] = vals
        try:
            fitted[name] = fit_order(list(zip(eps_list, vals)))
        except DegenerateFit:
            fitted[name] = float("nan")
        passed = max(vals) < 1e-9 or vals[-1] < vals[0]
    elif name == "decay":
        pairs = [run.decay_rate(e) for e in eps_list]
        rates = [r for r, _ in pairs]
        residuals["rate"] = rates
        residuals["deepest_abs_u"] = [d for _, d in pairs]
        finite = [r for r in rates if math.isfinite(r)]
        fitted[name] = float(np.mean(finite)) if finite else float("nan")
        stable = bool(finite) and min(finite) > 0 and (max(finite) - min(finite)) <= 0.2 * np.mean(finite)
        passed = stable or run.p.b0 == 0
    elif name == "map_monotone":
        mins, changes, wide = [], [], []
        for e in eps_list:
            d, ch = run.map_samples(e)
            mins.append(float(np.min(d)))
            changes.append(ch)
            if spec.wide_scan:
                wide.append(run.wide_scan(e))
        residuals["min_dM_dtheta"] = mins
        residuals["sign_changes"] = changes
        if spec.wide_scan:
            residuals["wide_scan_sign_changes"] = wide
        passed = all(m > 0 for m in mins) and all(c == 1 for c in changes)
        if spec.wide_scan:
            passed = passed and all(c == 1 for c in wide)
        if run.p.b0 == 0:
            passed = all(m > 0 for m in mins)
    elif name == "profile_identities":
        res = profile_identity_residuals(run.p, run.profiles)
        residuals = {k: [v] for k, v in res.items()}
        bad = [k for k, v in res.items() if not v <= PROFILE_TOLERANCES.get(k, 0.0)]
        notes.extend(f"{k} = {res[k]:.3g} over tolerance" for k in bad)
        passed = not bad
    elif name == "weyl":
        ds, rem = weyl_remainders(run.dom)
        residuals["remainder"] = rem
        residuals["depth"] = ds
        if run.dom.N >= 3:
            fitted[name] = fit_order(list(zip(ds, rem)))
            passed = fitted[name] >= 2.7
        else:
            fitted[name] = math.inf
            passed = max(rem) < 1e-14 * max(1.0, run.dom.vol)
    else:
        raise ValueError(f"unknown check {name!r}")
    return SweepResult(name, run.name, list(eps_list), residuals, fitted, band, bool(passed), notes)


def run_suite(fixture_name: str, eps_list=DEFAULT_EPS, checks=CHECKS, run=None, wide_scan=None):
    run = run or FixtureRun.from_fixture(fixture_name)
    wide = run.p.A0_prime != 0 if wide_scan is None else wide_scan
    return [
        run_check(CheckSpec(c, fixture_name, tuple(eps_list), wide_scan=wide and c == "map_monotone"), run)
        for c in checks
    ]


def generate_report(results) -> tuple[dict, str, int]:
    """JSON document, plain-text table and the number of failing checks."""
    rows = [r.to_dict() for r in results]
    failed = sum(1 for r in results if not r.passed)
    doc = {"results": rows, "n_checks": len(rows), "n_failed": failed}
    lines = [f"{'check':<20} {'fixture':<10} {'order':>10} {'band':>16}  pass"]
    for r in results:
        order = r.fitted_order
        o = "-" if order is None else ("exact" if math.isinf(order) else f"{order:.3f}")
        b = "-" if r.band is None else f"[{r.band[0]:g}, {r.band[1]:g}]"
        lines.append(f"{r.check:<20} {r.fixture:<10} {o:>10} {b:>16}  {'yes' if r.passed else 'NO'}")
    return doc, "\n".join(lines), failed


def write_report(results, path) -> int:
    doc, table, failed = generate_report(results)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return failed
