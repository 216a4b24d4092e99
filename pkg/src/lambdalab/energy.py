"""Energy of a lambda-family and the flat hyper-Kaehler model quantities.

The energy of a family ``lambda^{-1} Phi + xi_0 + lambda xi_1 + ...`` is
``E = (1/2 pi i) int tr(Phi ^ Psi)`` with ``Psi`` the (0,1)-part of ``xi_1``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .families import LambdaFamily, sigma_pullback
from .grid import DZ_DZBAR, GridField, ShapeError, integrate, wedge

PURITY_TOL = 1e-10


class InvalidLiftError(ValueError):
    pass


class UnsupportedFamilyError(ValueError):
    pass


@dataclass(frozen=True)
class TangentPair:
    """A tangent vector ``(gamma, beta)``: gamma of type (0,1), beta of type (1,0)."""

    gamma: GridField
    beta: GridField

    def __post_init__(self):
        for f in (self.gamma, self.beta):
            if f.degree != 1:
                raise ShapeError("tangent slots are 1-forms")
        scale = max(1.0, self.gamma.sup_norm(), self.beta.sup_norm())
        if np.abs(self.gamma.dz).max() > 1e-12 * scale:
            raise ShapeError("gamma must be of type (0,1)")
        if np.abs(self.beta.dzbar).max() > 1e-12 * scale:
            raise ShapeError("beta must be of type (1,0)")

    @classmethod
    def from_arrays(cls, domain, gamma, beta):
        return cls(GridField.one_form(domain, 0.0, gamma, dim=2),
                   GridField.one_form(domain, beta, 0.0, dim=2))

    def __sub__(self, other):
        return TangentPair(self.gamma - other.gamma, self.beta - other.beta)


@dataclass(frozen=True)
class EnergyReport:
    energy: complex
    trunc_err: float
    quad_err: float
    family_id: str = ""
    lift: str = "flat family: Phi = (1,0) part of xi_-1, Psi = (0,1) part of xi_1"

    def to_dict(self):
        d = asdict(self)
        e = d.pop("energy")
        return {"energy_re": float(e.real), "energy_im": float(e.imag), **d}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(complex(d["energy_re"], d["energy_im"]), d["trunc_err"], d["quad_err"],
                   d.get("family_id", ""), d.get("lift", cls.lift))


def _quadrature_error(w: GridField):
    """Rough error estimate: full grid versus a coarser rule on the same samples."""
    dom = w.domain
    vals = DZ_DZBAR * np.trace(w.values, axis1=-2, axis2=-1)
    full = integrate(w)
    if dom.is_torus:
        sub = vals[::2, ::2]
        coarse = dom.modulus.imag * sub.mean()
    else:
        x = np.linspace(*dom.x_range, dom.shape[0])
        y = np.linspace(*dom.y_range, dom.shape[1])
        coarse = simpson(simpson(vals, x=y, axis=1), x=x)
    return float(abs(full - coarse))


def higgs_field(fam: LambdaFamily) -> GridField:
    """The lambda^{-1} coefficient, checked to be of type (1,0)."""
    c = fam.coefficient(-1)
    if np.abs(c.dzbar).max() > PURITY_TOL * max(1.0, np.abs(c.dz).max()):
        raise InvalidLiftError("lambda^-1 coefficient has a (0,1) part: not a section lift")
    return c.part("10")


def energy_density(fam: LambdaFamily) -> GridField:
    """The 2-form ``tr(Phi ^ Psi) / (2 pi i)`` (trace kept as a 1x1 field)."""
    phi = higgs_field(fam)
    psi = fam.coefficient(1).part("01")
    return (1 / (2j * np.pi)) * wedge(phi, psi).trace()


def energy(fam: LambdaFamily) -> EnergyReport:
    w = energy_density(fam)
    return EnergyReport(integrate(w), float(fam.truncation_tail), _quadrature_error(w),
                        fam.label)


def energy_sigma(fam: LambdaFamily, sigma) -> complex:
    """Energy of the pulled-back family ``sigma^* s`` (compare with conj(E(s)))."""
    if sigma not in ("tau", "rho"):
        raise ValueError("energy reality is stated for tau and rho")
    if fam.kmin < -1 or fam.kmax > 1:
        raise UnsupportedFamilyError("energy reality is implemented for Laurent range [-1, 1]")
    return energy(sigma_pullback(fam, sigma)).energy


def moment_map(phi: GridField) -> complex:
    """``mu = -int tr(Phi ^ Phi^*)``."""
    return -integrate(wedge(phi, phi.conj_transpose()))


def omega_c(t1: TangentPair, t2: TangentPair) -> complex:
    """``2i int tr(beta_2 ^ gamma_1 - beta_1 ^ gamma_2)``."""
    return 2j * (integrate(wedge(t2.beta, t1.gamma)) - integrate(wedge(t1.beta, t2.gamma)))


def contract_Y(phi: GridField, t: TangentPair) -> complex:
    """Contraction of omega_c with the circle-action vector field ``(0, i Phi)``."""
    return 2 * integrate(wedge(phi, t.gamma))


def residue_rhs(phi: GridField, lift: TangentPair, reference: TangentPair, mu) -> complex:
    """``-int tr(Phi ^ (gamma_lift - gamma_ref)) + mu``.

    Only the (0,1)-slots enter; ``(i/2 pi)`` times this equals the energy
    when the reference slot is ``Phi^*`` and ``mu`` the moment map.
    """
    diff = lift - reference
    return -0.5 * contract_Y(phi, diff) + complex(mu)
