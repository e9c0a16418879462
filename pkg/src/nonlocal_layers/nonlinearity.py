"""Nonlinearity registry (f, q, A) and the scalar transforms built from it.

Every family is a closed-form expression with analytic derivatives up to
second order.  Besides plain evaluation each family provides numerically
stable versions of the removable-singularity quotients that show up in the
layer equations:

* ``over_s(s) = (g(s) - g(0)) / s``
* ``half_sq_ratio(s) = 2 * int_0^s g / s**2``

so that ``sqrt(2 F(s)) = s * sqrt(f.half_sq_ratio(s))`` stays accurate when
``s`` is tiny (deep inside the boundary layer, ``W`` drops to 1e-13).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import (
    IllegalFamilyParams,
    OrderUnsupported,
    QuadratureNoConvergence,
)

KINDS = (
    "linear",
    "cubic",
    "shifted-exponential",
    "affine-exp",
    "affine",
    "power",
    "constant",
)
_ALIASES = {
    "shifted_exp": "shifted-exponential",
    "shifted-exp": "shifted-exponential",
    "shifted_exponential": "shifted-exponential",
    "affine_exp": "affine-exp",
}
_NPARAMS = {
    "linear": 1,
    "cubic": 2,
    "shifted-exponential": 1,
    "affine-exp": 2,
    "affine": 2,
    "power": 1,
    "constant": 1,
}

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10

UniquenessCase = Literal["case_i", "case_ii", "neither"]


@dataclass(frozen=True)
class ScalarFamily:
    """One member of the built-in family registry.

    ``params`` follow the order in the family name: ``linear(a)``,
    ``cubic(a, c)``, ``shifted-exponential(a)``, ``affine-exp(alpha, beta)``,
    ``affine(alpha, beta)``, ``power(p)``, ``constant(c)``.
    """

    kind: str
    params: tuple[float, ...]
    max_derivative_order: int = 2

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise IllegalFamilyParams(f"unknown family kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        params = tuple(float(x) for x in np.atleast_1d(self.params))
        object.__setattr__(self, "params", params)
        if len(params) != _NPARAMS[kind]:
            raise IllegalFamilyParams(
                f"{kind} takes {_NPARAMS[kind]} parameter(s), got {len(params)}"
            )
        if not all(math.isfinite(x) for x in params):
            raise IllegalFamilyParams(f"{kind}: non-finite parameter")
        if kind == "cubic" and not (params[0] > 0 and params[1] >= 0):
            raise IllegalFamilyParams("cubic(a, c) needs a > 0 and c >= 0")
        if kind == "power":
            p = params[0]
            if p != int(p) or p < 2:
                raise IllegalFamilyParams("power(p) needs an integer p >= 2")

    def __str__(self):
        return f"{self.kind}({', '.join(repr(x) for x in self.params)})"

    # -- evaluation -----------------------------------------------------------

    def __call__(self, s, order: int = 0):
        if not 0 <= order <= self.max_derivative_order:
            raise OrderUnsupported(
                f"{self.kind}: derivative order {order} outside "
                f"[0, {self.max_derivative_order}]"
            )
        s = np.asarray(s, dtype=float)
        k, pr = self.kind, self.params
        if k == "linear":
            (a,) = pr
            out = (a * s, a + 0 * s, 0 * s)[order]
        elif k == "cubic":
            a, c = pr
            out = (a * s + c * s**3, a + 3 * c * s**2, 6 * c * s)[order]
        elif k == "shifted-exponential":
            (a,) = pr
            out = a * np.expm1(s) if order == 0 else a * np.exp(s)
        elif k == "affine-exp":
            al, be = pr
            out = al * be**order * np.exp(be * s)
        elif k == "affine":
            al, be = pr
            out = (al + be * s, be + 0 * s, 0 * s)[order]
        elif k == "power":
            p = int(pr[0])
            coef = (1, p, p * (p - 1))[order]
            out = coef * s ** (p - order)
        else:
            (c,) = pr
            out = (c + 0 * s, 0 * s, 0 * s)[order]
        return out[()] if out.ndim == 0 else out

    def over_s(self, s):
        """``(g(s) - g(0)) / s`` with the limit ``g'(0)`` at ``s = 0``."""
        s = np.asarray(s, dtype=float)
        k, pr = self.kind, self.params
        if k == "linear":
            out = pr[0] + 0 * s
        elif k == "cubic":
            out = pr[0] + pr[1] * s**2
        elif k in ("shifted-exponential", "affine-exp"):
            al, be = (pr[0], 1.0) if k == "shifted-exponential" else pr
            safe = np.where(s == 0, 1.0, s)
            out = np.where(s == 0, al * be, al * np.expm1(be * s) / safe)
        elif k == "affine":
            out = pr[1] + 0 * s
        elif k == "power":
            out = s ** (int(pr[0]) - 1)
        else:
            out = 0 * s
        return out[()] if out.ndim == 0 else out

    def delta(self, s):
        """``g(s) - g(0)`` without cancellation."""
        s = np.asarray(s, dtype=float)
        return s * self.over_s(s)

    def integral(self, t):
        """Closed-form ``int_0^t g(s) ds``."""
        t = np.asarray(t, dtype=float)
        k, pr = self.kind, self.params
        if k == "linear":
            out = 0.5 * pr[0] * t**2
        elif k == "cubic":
            out = 0.5 * pr[0] * t**2 + 0.25 * pr[1] * t**4
        elif k == "shifted-exponential":
            out = 0.5 * t**2 * self.half_sq_ratio(t)
        elif k == "affine-exp":
            al, be = pr
            if be == 0:
                out = al * t
            else:
                out = al * np.expm1(be * t) / be
        elif k == "affine":
            out = pr[0] * t + 0.5 * pr[1] * t**2
        elif k == "power":
            p = int(pr[0])
            out = t ** (p + 1) / (p + 1)
        else:
            out = pr[0] * t
        return out[()] if out.ndim == 0 else out

    def half_sq_ratio(self, s):
        """``2 * int_0^s g / s**2``; finite at 0 whenever ``g(0) = 0``."""
        s = np.asarray(s, dtype=float)
        k, pr = self.kind, self.params
        if k == "linear":
            out = pr[0] + 0 * s
        elif k == "cubic":
            out = pr[0] + 0.5 * pr[1] * s**2
        elif k == "shifted-exponential":
            out = pr[0] * _two_expm1_minus_s_over_s2(s)
        elif k == "power":
            p = int(pr[0])
            out = 2.0 * s ** (p - 1) / (p + 1)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(
                    s == 0, self(s, 1), 2.0 * self.integral(s) / np.where(s == 0, 1.0, s) ** 2
                )
        return out[()] if out.ndim == 0 else out


def _two_expm1_minus_s_over_s2(s):
    # 2 (e^s - 1 - s) / s^2 ; Taylor series near 0 avoids the double cancellation
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < 0.1
    series = np.zeros_like(s)
    term = np.ones_like(s)
    fact = 2.0
    for k in range(12):
        series = series + 2.0 * term / fact
        term = term * s
        fact *= k + 3
    safe = np.where(small, 1.0, s)
    direct = 2.0 * (np.expm1(safe) - safe) / safe**2
    return np.where(small, series, direct)


def eval_family(fam: ScalarFamily, s: float, order: int = 0) -> float:
    return float(fam(s, order))


# -- problem ------------------------------------------------------------------


@dataclass(frozen=True)
class NonlocalProblem:
    """Data of ``eps^2 A(avg q(u)) Lap u = f(u)``, ``u + eps*gamma*d_n u = b0``."""

    f: ScalarFamily
    q: ScalarFamily
    A: ScalarFamily
    b0: float
    gamma: float
    validated: "ValidationReport | None" = field(default=None, compare=False)

    @property
    def q0(self) -> float:
        return float(self.q(0.0))

    @property
    def A0(self) -> float:
        return float(self.A(self.q0))

    @property
    def A0_prime(self) -> float:
        return float(self.A(self.q0, 1))

    @property
    def A0_second(self) -> float:
        return float(self.A(self.q0, 2))

    def F(self, t):
        return self.f.integral(t)

    def sqrt_2F(self, t):
        """``sqrt(2 F(t))`` for ``t >= 0``, accurate down to denormals."""
        t = np.asarray(t, dtype=float)
        out = t * np.sqrt(self.f.half_sq_ratio(t))
        return out[()] if out.ndim == 0 else out

    def damping(self, w):
        """``f(w) / sqrt(2 A0 F(w))``, the decay coefficient of the Phi/Psi ODEs."""
        w = np.asarray(w, dtype=float)
        out = self.f.over_s(w) / np.sqrt(self.A0 * self.f.half_sq_ratio(w))
        return out[()] if out.ndim == 0 else out


@dataclass
class ValidationReport:
    ok: bool
    inf_fprime: float
    A_range: tuple[float, float]
    monotone_uniqueness_case: UniquenessCase
    messages: list[str] = field(default_factory=list)
    trivial: bool = False


def _sample(lo: float, hi: float, n: int = 10_000) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def _derivative_min(fam: ScalarFamily, lo: float, hi: float) -> float:
    # every built-in derivative is monotone on each side of 0, so the infimum
    # sits at an endpoint or at 0; the dense sample guards the analytic bound
    cands = [fam(lo, 1), fam(hi, 1)]
    if lo <= 0.0 <= hi:
        cands.append(fam(0.0, 1))
    return float(min(min(cands), np.min(fam(_sample(lo, hi), 1))))


def validate_problem(p: NonlocalProblem) -> ValidationReport:
    """Check the structural assumptions and classify the uniqueness case.

    Raises IllegalFamilyParams when ``f`` itself is unusable (``f(0) != 0``
    or ``inf f' <= 0``); every other violation is reported with ``ok=False``.
    """
    lo, hi = min(0.0, p.b0), max(0.0, p.b0)
    f0 = float(p.f(0.0))
    if abs(f0) > 1e-15:
        raise IllegalFamilyParams(f"f(0) = {f0!r} but f must vanish at 0 ({p.f})")
    inf_fp = _derivative_min(p.f, lo, hi)
    if not inf_fp > 0:
        raise IllegalFamilyParams(f"inf f' = {inf_fp!r} <= 0 on [{lo}, {hi}] ({p.f})")

    msgs: list[str] = []
    ok = True
    if not math.isfinite(p.gamma) or p.gamma < 0:
        ok = False
        msgs.append("gamma must be >= 0")
    if not math.isfinite(p.b0) or p.b0 < 0:
        ok = False
        msgs.append("b0 must be >= 0 (normalization b0 > 0, b0 = 0 trivial)")
    trivial = p.b0 == 0
    if trivial:
        msgs.append("b0 = 0: trivial solution u = 0")

    s = _sample(lo, hi)
    qs = p.q(s)
    qlo, qhi = float(np.min(qs)), float(np.max(qs))
    z = _sample(qlo, qhi)
    As = p.A(z)
    A_range = (float(np.min(As)), float(np.max(As)))
    if not A_range[0] > 0:
        ok = False
        msgs.append(f"A must be positive on [{qlo}, {qhi}], min is {A_range[0]!r}")

    qp = p.q(s, 1)
    Ap = p.A(z, 1)
    if np.max(Ap) <= 0 and np.min(qp) >= 0:
        case: UniquenessCase = "case_i"
    elif np.min(Ap) >= 0 and np.max(qp) <= 0:
        case = "case_ii"
    else:
        case = "neither"
    return ValidationReport(ok, inf_fp, A_range, case, msgs, trivial)


# -- transforms ---------------------------------------------------------------


def antiderivative_F(p: NonlocalProblem, t: float) -> float:
    return float(p.F(t))


def _qf_integrand(p: NonlocalProblem, s):
    # (q(s) - q(0)) / sqrt(2F(s)); the quotient form is regular at 0
    return p.q.over_s(s) / np.sqrt(p.f.half_sq_ratio(s))


def _quad(fun, a: float, b: float, what: str) -> float:
    val, err, info = integrate.quad(
        fun, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200, full_output=True
    )[:3]
    tol = max(QUAD_EPSABS, QUAD_EPSREL * abs(val))
    if err > 10 * tol:
        raise QuadratureNoConvergence(f"{what}: error estimate {err:.3g} over tolerance")
    return float(val)


def q_transform(
    p: NonlocalProblem, kind: Literal["QF", "QF_tilde", "G"], t: float
) -> float:
    """Adaptive Gauss-Kronrod evaluation of Q_F, tilde Q_F or G at ``t >= 0``.

    The integrands have removable singularities at 0; on the cell ``s <= 1e-300``
    the analytic limit (``q'(0)/sqrt(f'(0))`` for Q_F, ``q'(0)/f'(0)`` for the
    tilde integrand) is used.
    """
    if t < 0:
        raise ValueError("q_transform is defined for t >= 0")
    if t == 0:
        return 0.0
    fp0 = float(p.f(0.0, 1))
    qp0 = float(p.q(0.0, 1))
    if kind == "QF":
        lim = qp0 / math.sqrt(fp0)

        def g(s):
            return lim if s <= 1e-300 else float(_qf_integrand(p, s))

        return _quad(g, 0.0, t, "Q_F")
    if kind == "QF_tilde":
        lim = qp0 / fp0

        def g(s):
            if s <= 1e-300:
                return lim
            return q_transform(p, "QF", s) / float(p.sqrt_2F(s))

        return _quad(g, 0.0, t, "tilde Q_F")
    if kind == "G":
        rA = math.sqrt(p.A0)
        return _quad(lambda s: float(p.sqrt_2F(s)) / rA, 0.0, t, "G")
    raise ValueError(f"unknown transform {kind!r}")


# -- vectorised fixed-order versions (used on whole profile tables) ------------


@lru_cache(maxsize=None)
def gauss_legendre01(n: int = 40) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def qf_values(p: NonlocalProblem, w) -> np.ndarray:
    """Q_F(w) for an array of ``w >= 0`` via ``w * int_0^1 g(w x) dx``."""
    w = np.asarray(w, dtype=float)
    x, wt = gauss_legendre01()
    vals = _qf_integrand(p, np.multiply.outer(w, x))
    return w * (vals @ wt)


def qf_tilde_values(p: NonlocalProblem, w) -> np.ndarray:
    """tilde Q_F(w) = int_0^w Q_F(s)/sqrt(2F(s)) ds, vectorised."""
    w = np.asarray(w, dtype=float)
    x, wt = gauss_legendre01()
    s = np.multiply.outer(w, x)  # outer nodes
    inner = _qf_integrand(p, np.multiply.outer(s, x)) @ wt  # Q_F(s)/s
    vals = inner / np.sqrt(p.f.half_sq_ratio(s))
    return w * (vals @ wt)


def g_over_sq(p: NonlocalProblem, w) -> np.ndarray:
    """G(w) / w**2, regular at 0 (limit ``sqrt(f'(0)/A0) / 2``)."""
    w = np.asarray(w, dtype=float)
    x, wt = gauss_legendre01()
    vals = x * np.sqrt(p.f.half_sq_ratio(np.multiply.outer(w, x)))
    return (vals @ wt) / math.sqrt(p.A0)


def g_values(p: NonlocalProblem, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w**2 * g_over_sq(p, w)
