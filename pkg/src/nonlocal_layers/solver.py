"""Radial finite-difference solver for the local problem and the consistency map.

The local problem for a trial layer width ``theta`` is

    theta^2 (v'' + (N-1)/r v') = f(v),   v + gamma*eps*d_n v = b0 on the boundary,

and a solution of the nonlocal problem is ``v`` at a root of
``M(theta) = theta^2 - eps^2 A(avg q(v))``.

Nodes come from a tanh map ``r = c + hw * tanh(beta xi) / tanh(beta)`` whose
spacing is geometric toward each boundary; derivatives are central
differences in ``xi`` combined with the exact metric terms of the map.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import solve_banded

from .errors import GridTooCoarse, NewtonDiverged, NoSignChange
from .geometry import DomainGeometry, unit_ball_volume
from .nonlinearity import NonlocalProblem
from .profiles import LayerProfiles, build_W

NEWTON_TOL = 1e-11
NEWTON_MAXIT = 50
REL_SPACING = 1.0 / 400
BRACKETS = ((0.4, 1.6), (0.25, 2.5), (0.1, 4.0))
ROBIN_CUTOFF = 1e-12


@dataclass(frozen=True)
class RadialGrid:
    xi: np.ndarray
    r: np.ndarray
    g1: np.ndarray  # dr/dxi
    g2: np.ndarray  # d2r/dxi2
    dxi: float
    stretching: float
    symmetric: bool  # True for balls: xi = 0 is the centre

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def r_nodes(self) -> np.ndarray:
        return self.r


def make_grid(
    dom: DomainGeometry,
    eps: float,
    n: int | None = None,
    A0: float = 1.0,
    rel_spacing: float = REL_SPACING,
) -> RadialGrid:
    """Boundary-refined grid resolving layers of width ``eps*sqrt(A0)``.

    With ``n`` omitted the node count is chosen so that neighbouring depths
    differ by about ``rel_spacing`` inside the geometric zone.
    """
    lo, hi = dom.radial_interval
    symmetric = dom.kind == "ball"
    if symmetric:
        c, hw = 0.0, hi
    else:
        c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    scale = 0.5 * eps * math.sqrt(A0)
    beta = max(2.0, 0.5 * math.log(2 * hw / scale) + 1.0)
    if n is None:
        per_unit = math.ceil(2 * beta / rel_spacing)
        n = per_unit + 1 if symmetric else 2 * per_unit + 1
    n = int(n) | 1  # odd count keeps Simpson's rule on whole panels
    xi = np.linspace(0.0 if symmetric else -1.0, 1.0, n)
    tb = math.tanh(beta)
    th = np.tanh(beta * xi)
    sech2 = 1.0 - th**2
    r = c + hw * th / tb
    r[-1] = hi
    if not symmetric:
        r[0] = lo
    else:
        r[0] = 0.0
    g1 = hw * beta * sech2 / tb
    g2 = -2.0 * hw * beta**2 * th * sech2 / tb
    return RadialGrid(xi, r, g1, g2, float(xi[1] - xi[0]), beta, symmetric)


@dataclass
class LocalSolution:
    theta: float
    eps: float
    v: np.ndarray
    newton_iters: int
    residual_norm: float
    grid: RadialGrid = field(repr=False)

    def in_box(self, b0: float, tol: float = 1e-10) -> bool:
        return bool(np.all(self.v >= min(0.0, b0) - tol) and np.all(self.v <= max(0.0, b0) + tol))


@dataclass
class NonlocalSolution:
    theta_of_eps: float
    eps: float
    u: np.ndarray
    B_eps: float
    dnu_boundary: float
    map_residual: float
    newton_iters: int
    grid: RadialGrid = field(repr=False)
    dnu_components: dict[str, float] = field(default_factory=dict)
    u_components: dict[str, float] = field(default_factory=dict)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def summary(self) -> dict:
        return {
            "theta_of_eps": self.theta_of_eps,
            "eps": self.eps,
            "B_eps": self.B_eps,
            "dnu_boundary": self.dnu_boundary,
            "newton_iters": self.newton_iters,
            "map_residual": self.map_residual,
            "n_nodes": self.grid.n,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u"])
            for r, u in zip(self.grid.r, self.u):
                w.writerow([repr(float(r)), repr(float(u))])

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


# -- discretisation -----------------------------------------------------------


class _Operator:
    """Residual and tridiagonal Jacobian of the scaled discrete equations."""

    def __init__(self, p: NonlocalProblem, dom: DomainGeometry, grid: RadialGrid, theta, eps):
        self.p, self.dom, self.grid = p, dom, grid
        self.theta2 = theta * theta
        N, h = dom.N, grid.dxi
        r, g1, g2 = grid.r, grid.g1, grid.g2
        n = grid.n
        P = 1.0 / (h * g1) ** 2
        curv = np.zeros(n)
        if N > 1:
            np.divide(N - 1, r * g1, out=curv, where=r > 0)
        S = (curv - g2 / g1**3) / (2 * h)
        lower, diag, upper = P - S, -2 * P, P + S
        if grid.symmetric:
            # v_r = 0 and the radial term equals (N-1) v_rr at the centre
            lower[0], diag[0], upper[0] = 0.0, -2 * N * P[0], 2 * N * P[0]
        self.dirichlet = [False, False]
        self.robin_gain = [0.0, 0.0]  # coefficient of (b0 - v_end) feeding the ghost
        ge = p.gamma * eps
        ends = [] if grid.symmetric else [0]
        ends.append(n - 1)
        for e in ends:
            side = 0 if e == 0 else 1
            # a Robin length far below the end cell is Dirichlet up to rounding
            if ge <= ROBIN_CUTOFF * h * g1[e]:
                self.dirichlet[side] = True
                continue
            gain = 2 * h * g1[e] / ge
            if side == 1:
                # ghost v_{n} = v_{n-2} + gain (b0 - v_{n-1})
                lower[e] += upper[e]
                self.robin_gain[1] = upper[e] * gain
                upper[e] = 0.0
            else:
                # ghost v_{-1} = v_1 + gain (b0 - v_0)
                upper[e] += lower[e]
                self.robin_gain[0] = lower[e] * gain
                lower[e] = 0.0
        self.lower = self.theta2 * lower
        self.diag = self.theta2 * diag
        self.upper = self.theta2 * upper
        self.scale = 1.0 / np.abs(self.diag)
        self.b0 = p.b0
        self.ends = ends

    def residual(self, v):
        R = self.diag * v
        R[1:] += self.lower[1:] * v[:-1]
        R[:-1] += self.upper[:-1] * v[1:]
        R -= self.p.f(v)
        for e in self.ends:
            side = 0 if e == 0 else 1
            if self.dirichlet[side]:
                R[e] = v[e] - self.b0
            else:
                R[e] += self.theta2 * self.robin_gain[side] * (self.b0 - v[e])
        R[~self._dirichlet_mask()] *= self.scale[~self._dirichlet_mask()]
        return R

    def _dirichlet_mask(self):
        m = np.zeros(self.grid.n, dtype=bool)
        for e in self.ends:
            if self.dirichlet[0 if e == 0 else 1]:
                m[e] = True
        return m

    def jacobian_bands(self, v):
        n = self.grid.n
        d = self.diag - self.p.f(v, 1)
        lo = self.lower.copy()
        up = self.upper.copy()
        for e in self.ends:
            side = 0 if e == 0 else 1
            if self.dirichlet[side]:
                d[e] = 1.0
                if e == 0:
                    up[0] = 0.0
                else:
                    lo[-1] = 0.0
            else:
                d[e] -= self.theta2 * self.robin_gain[side]
        mask = ~self._dirichlet_mask()
        sc = np.where(mask, self.scale, 1.0)
        ab = np.zeros((3, n))
        ab[0, 1:] = up[:-1] * sc[:-1]
        ab[1] = d * sc
        ab[2, :-1] = lo[1:] * sc[1:]
        return ab


def _initial_guess(p: NonlocalProblem, dom: DomainGeometry, grid: RadialGrid, theta, prof):
    if prof is None:
        prof = build_W(p, n_points=1025)
    dist = dom.distance(grid.r)
    return np.asarray(prof("W", dist * math.sqrt(prof.A0) / theta), dtype=float)


def _check_resolution(dom: DomainGeometry, grid: RadialGrid, theta: float):
    hi = grid.r[-1]
    near = int(np.count_nonzero(hi - grid.r <= theta))
    if near < 8:
        raise GridTooCoarse(f"only {near} nodes within theta = {theta:.3g} of the boundary")


def solve_local(
    p: NonlocalProblem,
    dom: DomainGeometry,
    theta: float,
    eps: float,
    grid: RadialGrid,
    v0: np.ndarray | None = None,
    profile: LayerProfiles | None = None,
) -> LocalSolution:
    """Damped Newton for the local problem at layer width ``theta``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    _check_resolution(dom, grid, theta)
    op = _Operator(p, dom, grid, theta, eps)
    if p.b0 == 0:
        v = np.zeros(grid.n)
        return LocalSolution(theta, eps, v, 0, float(np.max(np.abs(op.residual(v)))), grid)
    v = _initial_guess(p, dom, grid, theta, profile) if v0 is None else np.array(v0, dtype=float)
    R = op.residual(v)
    norm = float(np.max(np.abs(R)))
    it = 0
    while norm >= NEWTON_TOL:
        if it >= NEWTON_MAXIT:
            raise NewtonDiverged(f"no convergence after {it} iterations, residual {norm:.3g}")
        step = solve_banded((1, 1), op.jacobian_bands(v), -R)
        lam = 1.0
        while True:
            trial = v + lam * step
            Rt = op.residual(trial)
            nt = float(np.max(np.abs(Rt)))
            if nt < norm or lam < 1e-10:
                break
            lam *= 0.5
        if not nt < norm:
            raise NewtonDiverged(f"line search stalled at residual {norm:.3g}")
        v, R, norm = trial, Rt, nt
        it += 1
    # one polishing step: quadratic convergence drives the error to rounding level
    step = solve_banded((1, 1), op.jacobian_bands(v), -R)
    trial = v + step
    nt = float(np.max(np.abs(op.residual(trial))))
    if nt <= norm:
        v, norm = trial, nt
    return LocalSolution(theta, eps, v, it, norm, grid)


# -- integrals and boundary derivatives ---------------------------------------


def _radial_weight(dom: DomainGeometry, grid: RadialGrid) -> tuple[np.ndarray, float]:
    if dom.N == 1:
        return grid.g1, 1.0
    return grid.r ** (dom.N - 1) * grid.g1, dom.N * unit_ball_volume(dom.N)


def domain_average(dom: DomainGeometry, grid: RadialGrid, values) -> float:
    w, area = _radial_weight(dom, grid)
    return float(area * integrate.simpson(np.asarray(values) * w, dx=grid.dxi) / dom.vol)


def average_q(p: NonlocalProblem, dom: DomainGeometry, solution) -> float:
    v = solution.v if hasattr(solution, "v") else solution.u
    return domain_average(dom, solution.grid, p.q(v))


_ONE_SIDED = np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0


def boundary_normal_derivatives(dom: DomainGeometry, grid: RadialGrid, v) -> dict[str, float]:
    """Outward normal derivative at each boundary end (4th-order one-sided)."""
    h = grid.dxi
    right = float(_ONE_SIDED @ v[-1:-6:-1]) / (h * grid.g1[-1])
    out = {}
    if dom.kind == "ball":
        out["outer"] = right
    else:
        left = float(_ONE_SIDED @ v[:5]) / (h * grid.g1[0])
        if dom.kind == "annulus":
            out["outer"], out["inner"] = right, left
        else:
            out["right"], out["left"] = right, left
    return out


def boundary_values(dom: DomainGeometry, v) -> dict[str, float]:
    if dom.kind == "ball":
        return {"outer": float(v[-1])}
    if dom.kind == "annulus":
        return {"outer": float(v[-1]), "inner": float(v[0])}
    return {"right": float(v[-1]), "left": float(v[0])}


# -- consistency map ----------------------------------------------------------


def consistency_map(
    p: NonlocalProblem,
    dom: DomainGeometry,
    eps: float,
    theta: float,
    grid: RadialGrid,
    v0=None,
    profile=None,
    return_solution: bool = False,
):
    sol = solve_local(p, dom, theta, eps, grid, v0=v0, profile=profile)
    B = average_q(p, dom, sol)
    M = theta * theta - eps * eps * float(p.A(B))
    return (M, sol, B) if return_solution else M


def map_derivative(
    p: NonlocalProblem,
    dom: DomainGeometry,
    eps: float,
    theta: float,
    grid: RadialGrid,
    profile=None,
    return_field: bool = False,
):
    """dM/dtheta with dv/dtheta from centred differences of the local solve."""
    base = solve_local(p, dom, theta, eps, grid, profile=profile)
    B = average_q(p, dom, base)
    h = 1e-4 * theta
    vp = solve_local(p, dom, theta + h, eps, grid, v0=base.v).v
    vm = solve_local(p, dom, theta - h, eps, grid, v0=base.v).v
    dv = (vp - vm) / (2 * h)
    dB = domain_average(dom, grid, p.q(base.v, 1) * dv)
    dM = 2 * theta - eps * eps * float(p.A(B, 1)) * dB
    return (dM, dv) if return_field else dM


def tangent_residual(p, dom, eps, theta, grid, v, dv) -> float:
    """Max residual of the linearised local problem satisfied by dv/dtheta.

    Differentiating theta^2 L v = f(v) in theta gives
    theta^2 L dv - f'(v) dv = -2 theta L v = -2 f(v)/theta, with homogeneous
    Robin data; the residual is scaled like the Newton residual.
    """
    op = _Operator(p, dom, grid, theta, eps)
    ab = op.jacobian_bands(v)
    n = grid.n
    Jdv = ab[1] * dv
    Jdv[:-1] += ab[0, 1:] * dv[1:]
    Jdv[1:] += ab[2, :-1] * dv[:-1]
    mask = ~op._dirichlet_mask()
    rhs = np.zeros(n)
    rhs[mask] = (-2.0 * p.f(v) / theta)[mask] * op.scale[mask]
    return float(np.max(np.abs(Jdv - rhs)[1:-1]))


def solve_nonlocal(
    p: NonlocalProblem,
    dom: DomainGeometry,
    eps: float,
    grid: RadialGrid | None = None,
    profile: LayerProfiles | None = None,
) -> NonlocalSolution:
    """Root of the consistency map; returns the field and its boundary data."""
    A0 = p.A0
    if grid is None:
        grid = make_grid(dom, eps, A0=A0)
    if profile is None:
        profile = build_W(p, n_points=1025)
    scale = eps * math.sqrt(A0)
    if p.b0 == 0:
        u = np.zeros(grid.n)
        return NonlocalSolution(
            scale, eps, u, p.q0, 0.0, 0.0, 0, grid,
            {k: 0.0 for k in boundary_normal_derivatives(dom, grid, u)},
            boundary_values(dom, u),
        )
    cache: dict = {}

    def M(theta):
        if theta in cache:
            return cache[theta][0]
        near = min(cache, key=lambda t: abs(t - theta)) if cache else None
        v0 = cache[near][1].v if near is not None else None
        m, sol, B = consistency_map(p, dom, eps, theta, grid, v0=v0, profile=profile, return_solution=True)
        cache[theta] = (m, sol, B)
        return m

    for lo, hi in BRACKETS:
        a, b = lo * scale, hi * scale
        Ma, Mb = M(a), M(b)
        if Ma * Mb < 0:
            break
    else:
        raise NoSignChange(f"consistency map keeps its sign on [0.1, 4] * eps*sqrt(A0), eps = {eps}")
    theta = optimize.brentq(M, a, b, xtol=1e-16 * scale, rtol=4 * np.finfo(float).eps, maxiter=200)
    M(theta)
    m, sol, B = cache[theta]
    dn = boundary_normal_derivatives(dom, grid, sol.v)
    return NonlocalSolution(
        theta_of_eps=float(theta),
        eps=eps,
        u=sol.v,
        B_eps=B,
        dnu_boundary=dn["outer"] if "outer" in dn else dn["right"],
        map_residual=float(abs(m)),
        newton_iters=sol.newton_iters,
        grid=grid,
        dnu_components=dn,
        u_components=boundary_values(dom, sol.v),
    )
