"""Radially symmetric domains: measures, curvatures, parallel surfaces, tubes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate

from .errors import BadDimension, DepthOutOfRange

DomainKind = Literal["interval", "ball", "annulus"]


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


@dataclass(frozen=True)
class BoundaryComponent:
    name: str
    radius: float  # 0 for interval endpoints
    area: float
    kappa: float  # principal curvature, positive when the domain is convex there

    def mean_curvature(self, delta: float = 0.0) -> float:
        return self.kappa / (1.0 - self.kappa * delta)


@dataclass(frozen=True)
class DomainGeometry:
    kind: DomainKind
    N: int
    params: tuple[float, ...]
    vol: float
    surf: float
    H_int: float
    H2_int: float
    d0: float
    d_star: float
    components: tuple[BoundaryComponent, ...]

    @property
    def radial_interval(self) -> tuple[float, float]:
        if self.kind == "ball":
            return 0.0, self.params[0]
        if self.kind == "annulus":
            return self.params[0], self.params[1]
        return 0.0, self.params[0]

    @property
    def surface_to_volume(self) -> float:
        return self.surf / self.vol

    @property
    def shape_ratio(self) -> float:
        """|Omega| int H / |dOmega|^2, invariant under dilation."""
        return self.vol * self.H_int / self.surf**2

    def component(self, name: str) -> BoundaryComponent:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(f"{self.kind} has no boundary component {name!r}")

    def distance(self, r):
        """Distance to the boundary of the radial coordinate ``r``."""
        r = np.asarray(r, dtype=float)
        lo, hi = self.radial_interval
        if self.kind == "ball":
            return hi - r
        return np.minimum(r - lo, hi - r)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "N": self.N,
            "params": list(self.params),
            "vol": self.vol,
            "surf": self.surf,
            "H_int": self.H_int,
            "H2_int": self.H2_int,
            "d0": self.d0,
            "d_star": self.d_star,
        }


def make_domain(kind: DomainKind, N: int, params) -> DomainGeometry:
    params = tuple(float(x) for x in np.atleast_1d(params))
    if any(not (x > 0 and math.isfinite(x)) for x in params):
        raise ValueError(f"{kind}: parameters must be positive, got {params}")
    if kind == "interval":
        if N != 1:
            raise BadDimension(f"interval needs N = 1, got {N}")
        (L,) = params
        comps = (BoundaryComponent("left", 0.0, 1.0, 0.0), BoundaryComponent("right", 0.0, 1.0, 0.0))
        vol, d0 = L, L / 2
    elif kind == "ball":
        if N < 2:
            raise BadDimension(f"ball needs N >= 2, got {N}")
        (R,) = params
        w = unit_ball_volume(N)
        comps = (BoundaryComponent("outer", R, N * w * R ** (N - 1), 1.0 / R),)
        vol, d0 = w * R**N, R
    elif kind == "annulus":
        if N < 2:
            raise BadDimension(f"annulus needs N >= 2, got {N}")
        Ri, Ro = params
        if not Ri < Ro:
            raise ValueError("annulus needs R_in < R_out")
        w = unit_ball_volume(N)
        comps = (
            BoundaryComponent("outer", Ro, N * w * Ro ** (N - 1), 1.0 / Ro),
            BoundaryComponent("inner", Ri, N * w * Ri ** (N - 1), -1.0 / Ri),
        )
        vol, d0 = w * (Ro**N - Ri**N), (Ro - Ri) / 2
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    surf = sum(c.area for c in comps)
    H_int = sum(c.area * c.kappa for c in comps)
    H2_int = sum(c.area * c.kappa**2 for c in comps)
    sup_k = max(abs(c.kappa) for c in comps)
    d_star = min(d0, 1.0 / (1.0 + 2.0 * sup_k))
    return DomainGeometry(kind, int(N), params, vol, surf, H_int, H2_int, d0, d_star, comps)


def _check_depth(dom: DomainGeometry, d: float, strict_zero: bool = False):
    bad = d < 0 or (strict_zero and d == 0) or d > dom.d_star * (1 + 1e-12)
    if bad:
        raise DepthOutOfRange(f"depth {d!r} outside [0, d* = {dom.d_star!r}]")


def curvature_at_depth(dom: DomainGeometry, delta: float, component: str = "outer") -> float:
    """Mean curvature of the parallel surface at distance ``delta`` inside ``component``."""
    _check_depth(dom, delta)
    if dom.N == 1:
        return 0.0
    return dom.component(component).mean_curvature(delta)


def _collar_jacobian(dom: DomainGeometry, delta):
    # area of the parallel surface at depth delta
    delta = np.asarray(delta, dtype=float)
    return sum(c.area * (1.0 - c.kappa * delta) ** (dom.N - 1) for c in dom.components)


def _collar_weyl(dom: DomainGeometry, delta):
    delta = np.asarray(delta, dtype=float)
    return dom.surf - (dom.N - 1) * dom.H_int * delta


def tube_volume(dom: DomainGeometry, d: float) -> tuple[float, float]:
    """(exact |Omega_d|, second-order tube expansion)."""
    _check_depth(dom, d)
    N = dom.N
    if dom.kind == "interval":
        exact = 2.0 * d
    elif dom.kind == "ball":
        (R,) = dom.params
        exact = dom.vol - unit_ball_volume(N) * (R - d) ** N
    else:
        Ri, Ro = dom.params
        w = unit_ball_volume(N)
        exact = w * ((Ro**N - (Ro - d) ** N) + ((Ri + d) ** N - Ri**N))
    weyl2 = d * dom.surf - 0.5 * d**2 * (N - 1) * dom.H_int
    return float(exact), float(weyl2)


def coarea_integral(
    dom: DomainGeometry,
    h: Callable[[np.ndarray], np.ndarray] | tuple[np.ndarray, np.ndarray],
    d: float,
) -> tuple[float, float]:
    """Integrate a depth-only function over the collar ``Omega_d``.

    ``h`` is a callable of depth or a tabulation ``(delta_nodes, values)`` on
    ``[0, d]``.  Returns the exact collar integral and its first-order
    curvature expansion.
    """
    _check_depth(dom, d)
    if callable(h):
        exact = integrate.quad(lambda x: h(x) * _collar_jacobian(dom, x), 0, d, epsabs=1e-14, epsrel=1e-13)[0]
        expanded = integrate.quad(lambda x: h(x) * _collar_weyl(dom, x), 0, d, epsabs=1e-14, epsrel=1e-13)[0]
    else:
        x, y = (np.asarray(a, dtype=float) for a in h)
        exact = integrate.simpson(y * _collar_jacobian(dom, x), x=x)
        expanded = integrate.simpson(y * _collar_weyl(dom, x), x=x)
    return float(exact), float(expanded)
