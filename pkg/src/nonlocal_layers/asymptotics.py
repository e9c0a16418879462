"""Expansion coefficients of the nonlocal average and the layer corrections.

Sign convention: ``B_eps = q(0) + eps*B1 + eps**2*B2 + o(eps**2)``, i.e. B2
already carries its sign.  Normal derivatives point toward the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import DomainGeometry, curvature_at_depth
from .nonlinearity import NonlocalProblem, q_transform
from .profiles import LayerProfiles, expansion_functionals, robin_denominator


@dataclass(frozen=True)
class ExpansionCoefficients:
    b_star: float
    A0: float
    QF_bstar: float
    I_WPhi: float
    J_WPsi: float
    B1: float
    B2: float
    A1: float
    G_boundary: dict[str, float]
    q0: float = 0.0
    A0_prime: float = 0.0
    surface_to_volume: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def B_coefficients(
    p: NonlocalProblem,
    prof: LayerProfiles,
    dom: DomainGeometry,
    functionals: tuple[float, float] | None = None,
) -> ExpansionCoefficients:
    """Assemble B1, B2, A1 and the boundary flux correction.

    ``functionals`` lets a caller pass independently computed (I, J).
    """
    b = prof.b_star
    A0 = prof.A0
    Ap = p.A0_prime
    sv = dom.surface_to_volume
    QF = q_transform(p, "QF", b) if b > 0 else 0.0
    I, J = expansion_functionals(p, prof) if functionals is None else functionals
    B1 = sv * math.sqrt(A0) * QF
    B2 = -(Ap / A0**1.5) * QF * I * sv**2 - (dom.N - 1) * J * dom.H_int / dom.vol
    return ExpansionCoefficients(
        b_star=b,
        A0=A0,
        QF_bstar=QF,
        I_WPhi=I,
        J_WPsi=J,
        B1=B1,
        B2=B2,
        A1=Ap * B1,
        G_boundary=boundary_flux_terms(p, dom, b, QF),
        q0=p.q0,
        A0_prime=Ap,
        surface_to_volume=sv,
    )


def boundary_flux_terms(
    p: NonlocalProblem, dom: DomainGeometry, b_star: float, QF_bstar: float
) -> dict[str, float]:
    """Boundary correction per boundary component (constant on each)."""
    A0 = p.A0
    nonlocal_part = dom.surface_to_volume * (p.A0_prime / A0) * float(p.F(b_star)) * QF_bstar
    # int_0^b sqrt(2F) = sqrt(A0) G(b)
    area = math.sqrt(A0) * q_transform(p, "G", b_star) if b_star > 0 else 0.0
    return {
        c.name: nonlocal_part + (dom.N - 1) * c.kappa * area for c in dom.components
    }


def predict_B(coeffs: ExpansionCoefficients, eps: float) -> float:
    return coeffs.q0 + eps * coeffs.B1 + eps**2 * coeffs.B2


def phi_weight(
    p: NonlocalProblem,
    coeffs: ExpansionCoefficients,
    eps: float,
    B_eps_measured: float | None = None,
) -> float:
    """Coefficient multiplying Phi in the corrected profile."""
    A0 = coeffs.A0
    if B_eps_measured is not None:
        return (A0 - float(p.A(B_eps_measured))) / A0**2
    return -eps * coeffs.surface_to_volume * coeffs.A0_prime * coeffs.QF_bstar / A0**1.5


def interior_field(
    p: NonlocalProblem,
    prof: LayerProfiles,
    coeffs: ExpansionCoefficients,
    dom: DomainGeometry,
    eps: float,
    delta,
    kappa,
    B_eps_measured: float | None = None,
):
    """Vectorised two-term value and normal derivative.

    ``kappa`` is the boundary curvature of the nearest component for each depth.
    """
    delta = np.asarray(delta, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    t = delta / eps
    geo = (dom.N - 1) * kappa / (1.0 - kappa * delta)
    c_phi = phi_weight(p, coeffs, eps, B_eps_measured)
    W = prof("W", t)
    u = W + c_phi * prof("Phi", t) + eps * geo * prof("Psi", t)
    dnu = (
        p.sqrt_2F(W) / (math.sqrt(coeffs.A0) * eps)
        - c_phi * prof("Phip", t) / eps
        - geo * prof("Psip", t)
    )
    return u, dnu


def predict_interior(
    p: NonlocalProblem,
    prof: LayerProfiles,
    coeffs: ExpansionCoefficients,
    dom: DomainGeometry,
    eps: float,
    delta: float,
    B_eps_measured: float | None = None,
    component: str = "outer",
) -> tuple[float, float]:
    """Two-term value and normal derivative (toward the boundary) at depth ``delta``."""
    curvature_at_depth(dom, delta, component)  # range check
    kappa = 0.0 if dom.N == 1 else dom.component(component).kappa
    u, dnu = interior_field(p, prof, coeffs, dom, eps, delta, kappa, B_eps_measured)
    return float(u), float(dnu)


def predict_boundary(
    p: NonlocalProblem,
    prof: LayerProfiles,
    coeffs: ExpansionCoefficients,
    dom: DomainGeometry,
    eps: float,
    component: str = "outer",
) -> tuple[float, float, float]:
    """(u on the boundary, normal derivative there, flux correction value)."""
    comp = component if component in coeffs.G_boundary else next(iter(coeffs.G_boundary))
    G = coeffs.G_boundary[comp]
    b = coeffs.b_star
    if b == 0:
        return 0.0, 0.0, G
    D = robin_denominator(p, b) / math.sqrt(coeffs.A0)
    u = b + eps * p.gamma * G / D
    dnu = float(p.sqrt_2F(b)) / (math.sqrt(coeffs.A0) * eps) - G / D
    return u, dnu, G
