"""Half-line layer profiles W, Phi, Psi and the scalar functionals built on them.

W solves ``A0 W'' = f(W)`` on ``t > 0`` with ``W(0) = b*`` and ``W -> 0``; it is
obtained from the first integral ``W' = -sqrt(2F(W)/A0)`` integrated for
``z = log W`` so that relative accuracy survives far into the tail.

Phi and Psi solve the linear first-order reductions

    Phi' + k(t) Phi = -sqrt(A0 F(W)/2)
    Psi' + k(t) Psi =  sqrt(A0/(2F(W))) G(W)

with ``k = f(W)/sqrt(2 A0 F(W)) > 0``, started from their Robin data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from .errors import ProfileMismatch, ResonantRates, StepSizeUnderflow
from .nonlinearity import (
    NonlocalProblem,
    _derivative_min,
    g_over_sq,
    g_values,
    q_transform,
    qf_tilde_values,
    qf_values,
)

DEFAULT_POINTS = 4097
GRID_STRETCH = 3.0
ODE_RTOL = 1e-13
MISMATCH_TOL = 1e-6

Integrand = Literal["q_of_W_minus_q0", "qprime_W_Phi", "qprime_W_Psi"]


@dataclass(frozen=True)
class DecayRates:
    M0: float
    M1: float
    M_tilde: float
    C_hat: float | None


@dataclass(frozen=True)
class LayerProfiles:
    """Profiles tabulated on ``t = T (exp(alpha s) - 1) / (exp(alpha) - 1)``, s uniform."""

    t_grid: np.ndarray
    W: np.ndarray
    Wp: np.ndarray
    b_star: float
    A0: float
    M0: float
    M_tilde: float
    tail_rate: float
    Phi: np.ndarray | None = None
    Phip: np.ndarray | None = None
    Psi: np.ndarray | None = None
    Psip: np.ndarray | None = None
    M1: float = float("nan")
    C_hat: float | None = None
    stretch: float = GRID_STRETCH
    phi_mismatch: float = 0.0
    psi_mismatch: float = 0.0
    _splines: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def T_max(self) -> float:
        return float(self.t_grid[-1])

    @property
    def ds(self) -> float:
        return 1.0 / (len(self.t_grid) - 1)

    @property
    def dt_ds(self) -> np.ndarray:
        return _grid_jacobian(self.T_max, self.stretch, len(self.t_grid))

    def integrate(self, values, rate: float, k: int = 0) -> float:
        """``int_0^inf t^k h(t) dt`` for tabulated ``h`` plus an exponential tail."""
        h = np.asarray(values, dtype=float)
        t = self.t_grid
        body = integrate.simpson(t**k * h * self.dt_ds, dx=self.ds)
        return float(body + h[-1] * _tail_moment(self.T_max, rate, k))

    def _spline(self, name: str):
        if name not in self._splines:
            t = self.t_grid
            if name == "W":
                if self.b_star == 0:
                    sp = None
                else:
                    sp = CubicHermiteSpline(t, np.log(self.W), self.Wp / self.W)
            elif name == "Phi":
                sp = CubicHermiteSpline(t, self.Phi, self.Phip)
            else:
                sp = CubicHermiteSpline(t, self.Psi, self.Psip)
            self._splines[name] = sp
        return self._splines[name]

    def __call__(self, name: Literal["W", "Wp", "Phi", "Phip", "Psi", "Psip"], t):
        """Evaluate a profile at arbitrary ``t >= 0``.

        Past T_max, W continues exponentially and Phi, Psi continue with their
        ratio to W extended linearly (exact for resonant t*exp(-t) tails).
        """
        t = np.asarray(t, dtype=float)
        base = name.rstrip("p")
        deriv = name.endswith("p")
        T = self.T_max
        tc = np.minimum(t, T)
        if base == "W" and self.b_star == 0:
            return np.zeros_like(t)[()]
        if base == "W":
            sp = self._spline("W")
            out = np.exp(sp(tc)) * (sp(tc, 1) if deriv else 1.0)
        else:
            sp = self._spline(base)
            out = sp(tc, 1) if deriv else sp(tc)
        past = t > T
        if np.any(past):
            w_end, wp_end = self.W[-1], self.Wp[-1]
            s = t - T
            w = w_end * np.exp(-self.tail_rate * s)
            wp = -self.tail_rate * w
            if base == "W":
                ext = wp if deriv else w
            else:
                y, yp = getattr(self, base)[-1], getattr(self, base + "p")[-1]
                ratio = y / w_end
                slope = yp / w_end - y * wp_end / w_end**2
                r = ratio + slope * s
                ext = (wp * r + w * slope) if deriv else w * r
            out = np.where(past, ext, out)
        return out[()] if np.ndim(out) == 0 else out

    def to_csv(self, path) -> None:
        cols = ["t", "W", "Wp", "Phi", "Phip", "Psi", "Psip"]
        data = [self.t_grid, self.W, self.Wp, self.Phi, self.Phip, self.Psi, self.Psip]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in zip(*data):
                w.writerow([repr(float(x)) for x in row])


def _tail_moment(T: float, rate: float, k: int) -> float:
    # int_T^inf t^k exp(-rate (t - T)) dt
    return sum(
        math.factorial(k) / math.factorial(k - j) * T ** (k - j) / rate ** (j + 1)
        for j in range(k + 1)
    )


def _grid(T: float, alpha: float, n: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)
    t = T * np.expm1(alpha * s) / math.expm1(alpha)
    t[-1] = T
    return t


def _grid_jacobian(T: float, alpha: float, n: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)
    return T * alpha * np.exp(alpha * s) / math.expm1(alpha)


# -- scalars ------------------------------------------------------------------


def solve_b_star(p: NonlocalProblem) -> float:
    """Root of ``b + gamma sqrt(2F(b)/A0) = b0`` on ``[0, b0]``."""
    if p.b0 == 0:
        return 0.0
    if p.gamma == 0:
        return float(p.b0)
    scale = p.gamma / math.sqrt(p.A0)

    def g(b):
        return b + scale * float(p.sqrt_2F(b)) - p.b0

    b = optimize.brentq(g, 0.0, p.b0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(b)


def robin_denominator(p: NonlocalProblem, b_star: float) -> float:
    return p.gamma * float(p.f(b_star)) + math.sqrt(p.A0) * float(p.sqrt_2F(b_star))


def phi_initial(p: NonlocalProblem, b_star: float) -> float:
    if b_star == 0:
        return 0.0
    return -p.gamma * p.A0 * float(p.F(b_star)) / robin_denominator(p, b_star)


def psi_initial(p: NonlocalProblem, b_star: float) -> float:
    if b_star == 0:
        return 0.0
    G = float(g_values(p, b_star))
    return p.gamma * p.A0 * G / robin_denominator(p, b_star)


def decay_rates(p: NonlocalProblem, b_star: float | None = None) -> DecayRates:
    """M0, M1, M_tilde and the envelope constant C_hat.

    Raises ResonantRates when ``|2 M1 - M0| < 1e-8``.
    """
    if b_star is None:
        b_star = solve_b_star(p)
    A0 = p.A0
    M0 = math.sqrt(_derivative_min(p.f, 0.0, b_star) / A0)
    s = np.linspace(0.0, b_star, 10_001) if b_star > 0 else np.array([0.0])
    M1 = float(np.min(p.damping(s)))
    M_tilde = min(M1, 0.5 * M0)
    gap = abs(2 * M1 - M0)
    if gap < 1e-8:
        raise ResonantRates(f"2 M1 - M0 = {2 * M1 - M0!r}; envelope constant undefined")
    C_hat = abs(phi_initial(p, b_star)) + math.sqrt(2 * b_star * float(p.f(b_star)) * A0) / gap
    return DecayRates(M0, M1, M_tilde, C_hat)


def _rates_and_tmax(p, b_star, T_max):
    try:
        rates = decay_rates(p, b_star)
    except ResonantRates:
        rates = None
    if rates is None:
        M0 = math.sqrt(_derivative_min(p.f, 0.0, b_star) / p.A0)
        s = np.linspace(0.0, b_star, 10_001) if b_star > 0 else np.array([0.0])
        M1 = float(np.min(p.damping(s)))
        rates = DecayRates(M0, M1, min(M1, 0.5 * M0), None)
    T_auto = max(30.0 / rates.M0, 30.0 / rates.M_tilde)
    if b_star > 0:
        # keep b* exp(-M0 T) below 1e-12 even for large b*
        T_auto = max(T_auto, math.log(max(b_star, 1.0) * 1e12) / rates.M0)
    T = T_auto if T_max is None else max(float(T_max), T_auto)
    return rates, T


# -- builders -----------------------------------------------------------------


def _rhs_factory(p: NonlocalProblem, with_phi: bool, with_psi: bool):
    # state: z = log W, then Phi/W and/or Psi/W; dividing by W keeps relative
    # accuracy in the tail, where all three profiles decay at the same rate
    A0 = p.A0
    rA = math.sqrt(A0)

    def rhs(t, y):
        w = math.exp(y[0])
        ratio = float(p.f.half_sq_ratio(w))
        sr = math.sqrt(ratio)
        out = [-sr / rA]
        # k + W'/W, written without cancellation
        c = (float(p.f.over_s(w)) - ratio) / (rA * sr)
        i = 1
        if with_phi:
            out.append(-c * y[i] - 0.5 * rA * sr)
            i += 1
        if with_psi:
            out.append(-c * y[i] + rA * float(g_over_sq(p, w)) / sr)
        return out

    return rhs


def _integrate(p, b_star, t_grid, y0_extra, with_phi, with_psi):
    y0 = [math.log(b_star)] + [y / b_star for y in y0_extra]
    sol = integrate.solve_ivp(
        _rhs_factory(p, with_phi, with_psi),
        (0.0, t_grid[-1]),
        y0,
        method="DOP853",
        t_eval=t_grid,
        rtol=ODE_RTOL,
        atol=ODE_RTOL,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"profile integration failed: {sol.message}")
    y = sol.y
    W = np.exp(y[0])
    return [y[0]] + [W * row for row in y[1:]]


def build_W(
    p: NonlocalProblem, T_max: float | None = None, n_points: int = DEFAULT_POINTS
) -> LayerProfiles:
    b_star = solve_b_star(p)
    rates, T = _rates_and_tmax(p, b_star, T_max)
    A0 = p.A0
    tail_rate = math.sqrt(float(p.f(0.0, 1)) / A0)
    t = _grid(T, GRID_STRETCH, n_points)
    if b_star == 0:
        W = np.zeros_like(t)
        Wp = np.zeros_like(t)
    else:
        z = _integrate(p, b_star, t, [], False, False)[0]
        W = np.exp(z)
        Wp = -p.sqrt_2F(W) / math.sqrt(A0)
    return LayerProfiles(
        t_grid=t,
        W=W,
        Wp=Wp,
        b_star=b_star,
        A0=A0,
        M0=rates.M0,
        M_tilde=rates.M_tilde,
        tail_rate=tail_rate,
        M1=rates.M1,
        C_hat=rates.C_hat,
    )


def _damping_and_sources(p: NonlocalProblem, W: np.ndarray):
    rA = math.sqrt(p.A0)
    sr = np.sqrt(p.f.half_sq_ratio(W))
    k = p.f.over_s(W) / (rA * sr)
    src_phi = -0.5 * rA * W * sr
    src_psi = rA * W * g_over_sq(p, W) / sr
    return k, src_phi, src_psi


def _variation_of_constants(prof: LayerProfiles, k, src, y0, idx):
    # y = exp(-X) [y0 + int_0^t exp(X) src], X = int_0^t k, by cumulative Simpson in s
    jac = prof.dt_ds
    X = integrate.cumulative_simpson(k * jac, dx=prof.ds, initial=0.0)
    inner = integrate.cumulative_simpson(np.exp(X) * src * jac, dx=prof.ds, initial=0.0)
    return np.exp(-X[idx]) * (y0 + inner[idx])


def _linear_profile(p: NonlocalProblem, prof: LayerProfiles, which: str):
    n = len(prof.t_grid)
    if prof.b_star == 0:
        z = np.zeros(n)
        return z, z.copy(), 0.0
    if which == "Phi":
        y0 = phi_initial(p, prof.b_star)
        y = _integrate(p, prof.b_star, prof.t_grid, [y0], True, False)[1]
    else:
        y0 = psi_initial(p, prof.b_star)
        y = _integrate(p, prof.b_star, prof.t_grid, [y0], False, True)[1]
    k, src_phi, src_psi = _damping_and_sources(p, prof.W)
    src = src_phi if which == "Phi" else src_psi
    yp = -k * y + src
    # cross-check against the variation-of-constants formula at 16 nodes
    idx = np.linspace(0, n - 1, 16).astype(int)
    ref = _variation_of_constants(prof, k, src, y0, idx)
    mismatch = float(np.max(np.abs(ref - y[idx])))
    if not mismatch <= MISMATCH_TOL:
        raise ProfileMismatch(f"{which}: ODE and closed form differ by {mismatch:.3g}")
    return y, yp, mismatch


def build_Phi(p: NonlocalProblem, prof: LayerProfiles):
    """Returns (Phi, Phi', max discrepancy against the closed form)."""
    return _linear_profile(p, prof, "Phi")


def build_Psi(p: NonlocalProblem, prof: LayerProfiles):
    return _linear_profile(p, prof, "Psi")


def build_profiles(
    p: NonlocalProblem, T_max: float | None = None, n_points: int = DEFAULT_POINTS
) -> LayerProfiles:
    prof = build_W(p, T_max, n_points)
    Phi, Phip, e1 = build_Phi(p, prof)
    Psi, Psip, e2 = build_Psi(p, prof)
    if prof.C_hat is None and prof.b_star > 0:
        # resonant rates: fall back to the empirical envelope of |Phi|
        env = float(np.max(np.abs(Phi) * np.exp(prof.M_tilde * prof.t_grid)))
        prof = replace(prof, C_hat=1.05 * env)
    return replace(
        prof, Phi=Phi, Phip=Phip, Psi=Psi, Psip=Psip, phi_mismatch=e1, psi_mismatch=e2,
        _splines={},
    )


# -- functionals --------------------------------------------------------------


def layer_moment(
    p: NonlocalProblem, prof: LayerProfiles, k: int, integrand: Integrand
) -> tuple[float, float | None]:
    """``int_0^inf t^k h dt`` and, for ``q(W) - q(0)``, the matching transform identity."""
    if k not in (0, 1, 2):
        raise ValueError("moment order must be 0, 1 or 2")
    W = prof.W
    if integrand == "q_of_W_minus_q0":
        lhs = prof.integrate(p.q.delta(W), prof.tail_rate, k)
        rA = math.sqrt(prof.A0)
        if prof.b_star == 0:
            rhs = 0.0
        elif k == 0:
            rhs = rA * q_transform(p, "QF", prof.b_star)
        elif k == 1:
            rhs = rA * prof.integrate(qf_values(p, W), prof.tail_rate)
        else:
            rhs = 2 * prof.A0 * prof.integrate(qf_tilde_values(p, W), prof.tail_rate)
        return lhs, float(rhs)
    if integrand == "qprime_W_Phi":
        return prof.integrate(p.q(W, 1) * prof.Phi, prof.M_tilde, k), None
    if integrand == "qprime_W_Psi":
        return prof.integrate(p.q(W, 1) * prof.Psi, prof.M_tilde, k), None
    raise ValueError(f"unknown integrand {integrand!r}")


def expansion_functionals(p: NonlocalProblem, prof: LayerProfiles) -> tuple[float, float]:
    """(I, J) = (int q'(W) Phi, int sqrt(A0) Q_F(W) - q'(W) Psi)."""
    if prof.b_star == 0:
        return 0.0, 0.0
    I = layer_moment(p, prof, 0, "qprime_W_Phi")[0]
    qf = math.sqrt(prof.A0) * prof.integrate(qf_values(p, prof.W), prof.tail_rate)
    J = qf - layer_moment(p, prof, 0, "qprime_W_Psi")[0]
    return I, J
