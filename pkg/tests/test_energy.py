import json

import numpy as np
import pytest

from conftest import random_tracefree
from lambdalab.builders import (SolutionData, constant_solution, family_from_uq,
                                random_lift_perturbation)
from lambdalab.energy import (EnergyReport, InvalidLiftError, TangentPair, UnsupportedFamilyError,
                              contract_Y, energy, energy_sigma, moment_map, omega_c, residue_rhs)
from lambdalab.families import LambdaFamily, gauge_apply
from lambdalab.grid import Domain, GridField


def _const_pair(dom, gamma, beta):
    return TangentPair.from_arrays(dom, np.broadcast_to(gamma, dom.shape + (2, 2)),
                                   np.broadcast_to(beta, dom.shape + (2, 2)))


def _random_pair(dom, rng):
    return TangentPair.from_arrays(dom, random_tracefree(dom.shape, rng),
                                   random_tracefree(dom.shape, rng))


def test_zero_higgs_has_zero_energy():
    dom = Domain.torus(16)
    psi = np.broadcast_to(np.diag([1.0, -1.0]), dom.shape + (2, 2))
    fam = LambdaFamily(dom, {1: GridField.one_form(dom, 0.0, psi)})
    assert energy(fam).energy == 0


@pytest.mark.parametrize("q0", [1.0, 2.0, 0.5j])
def test_constant_s3_energy(q0):
    # tr(Phi ^ Psi) = 2i e^{2u} dx dy with e^{2u} = |q|, so E = |q| area / pi
    fam = family_from_uq(constant_solution(Domain.torus(32), q0, "S3"))
    assert abs(energy(fam).energy - abs(q0) / np.pi) < 1e-14


def test_energy_on_sheared_torus():
    dom = Domain.torus(32, modulus=0.3 + 1.2j)
    fam = family_from_uq(constant_solution(dom, 1.0, "S3"))
    assert abs(energy(fam).energy - 1.2 / np.pi) < 1e-13


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_energy_lift_invariance(s3_family, seed):
    E = energy(s3_family).energy
    g = random_lift_perturbation(s3_family.domain, seed, K=6)
    assert abs(energy(gauge_apply(s3_family, g)).energy - E) < 1e-9


def test_truncated_gauge_order_gives_same_energy(s3_family):
    # energy reads only the lambda^-1 and lambda^1 coefficients
    full = energy(gauge_apply(s3_family, random_lift_perturbation(s3_family.domain, 5, K=6))).energy
    g = random_lift_perturbation(s3_family.domain, 5, K=6, order=3)
    short = energy(gauge_apply(s3_family, g, order=2)).energy
    assert abs(full - short) < 1e-13


def test_impure_lift_rejected(s3_family):
    dom = s3_family.domain
    extra = np.broadcast_to(np.diag([1.0, -1.0]), dom.shape + (2, 2))
    bad = s3_family.coefficient(-1) + GridField.one_form(dom, 0.0, extra)
    fam = s3_family.replace(coeffs={**s3_family.coeffs, -1: bad}, higgs_type=False)
    with pytest.raises(InvalidLiftError):
        energy(fam)


def test_energy_reality(strip_family, s3_family):
    E = energy(strip_family).energy
    assert abs(energy_sigma(strip_family, "tau") - np.conj(E)) < 1e-12
    E = energy(s3_family).energy
    assert abs(energy_sigma(s3_family, "rho") - np.conj(E)) < 1e-12


def test_energy_reality_range(s3_family):
    fam = s3_family.replace(coeffs={**s3_family.coeffs, 2: s3_family.coefficient(1)})
    with pytest.raises(UnsupportedFamilyError):
        energy_sigma(fam, "tau")
    with pytest.raises(ValueError):
        energy_sigma(s3_family, "N")


def test_moment_map_values():
    dom = Domain.torus(16)
    phi = GridField.one_form(dom, np.broadcast_to(np.array([[0, 1.0], [0, 0]]), dom.shape + (2, 2)), 0.0)
    # tr(Phi ^ Phi*) = dz ^ dzbar = -2i dx dy on the unit torus
    assert abs(moment_map(phi) - 2j) < 1e-14
    rng = np.random.default_rng(3)
    U, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    rot = GridField.one_form(dom, U @ phi.dz @ U.conj().T, 0.0)
    assert abs(moment_map(rot) - 2j) < 1e-14


def test_moment_map_positive_imaginary():
    dom = Domain.torus(16)
    phi = GridField.one_form(dom, random_tracefree(dom.shape, np.random.default_rng(4)), 0.0)
    mu = moment_map(phi)
    assert abs(mu.real) < 1e-12 and mu.imag > 0


def test_omega_c_constant_example():
    dom = Domain.torus(8)
    a, b = 0.7, -1.3j
    E12, E21, Z = np.array([[0, 1], [0, 0]]), np.array([[0, 0], [1, 0]]), np.zeros((2, 2))
    t1 = _const_pair(dom, b * E21, Z)
    t2 = _const_pair(dom, Z, a * E12)
    # 2i int tr(beta_2 ^ gamma_1) = 2i * ab * (-2i) = 4ab
    assert abs(omega_c(t1, t2) - 4 * a * b) < 1e-14


def test_omega_c_antisymmetric():
    dom = Domain.torus(16)
    rng = np.random.default_rng(5)
    t1, t2 = _random_pair(dom, rng), _random_pair(dom, rng)
    assert abs(omega_c(t1, t2) + omega_c(t2, t1)) < 1e-12
    assert abs(omega_c(t1, t1)) < 1e-12


def test_contraction_matches_omega_c():
    dom = Domain.torus(16)
    rng = np.random.default_rng(6)
    phi = GridField.one_form(dom, random_tracefree(dom.shape, rng), 0.0)
    t = _random_pair(dom, rng)
    X = TangentPair(GridField.one_form(dom, 0.0, 0.0, dim=2), 1j * phi)
    assert abs(contract_Y(phi, t) - omega_c(X, t)) < 1e-12


def test_residue_identity(s3_family):
    phi = s3_family.coefficient(-1).part("10")
    psi = s3_family.coefficient(1).part("01")
    ref = TangentPair(phi.conj_transpose(), phi)
    mu = moment_map(phi)
    assert abs(residue_rhs(phi, ref, ref, mu) - mu) == 0
    rhs = 1j / (2 * np.pi) * residue_rhs(phi, TangentPair(psi, phi), ref, mu)
    assert abs(rhs - energy(s3_family).energy) < 1e-12


def test_residue_identity_random():
    dom = Domain.torus(16)
    rng = np.random.default_rng(7)
    phi = GridField.one_form(dom, random_tracefree(dom.shape, rng), 0.0)
    psi = GridField.one_form(dom, 0.0, random_tracefree(dom.shape, rng))
    fam = LambdaFamily(dom, {-1: phi, 1: psi})
    ref = TangentPair(phi.conj_transpose(), phi)
    rhs = 1j / (2 * np.pi) * residue_rhs(phi, TangentPair(psi, phi), ref, moment_map(phi))
    assert abs(rhs - energy(fam).energy) < 1e-12


def test_tangent_pair_types():
    dom = Domain.torus(8)
    one = np.ones(dom.shape + (2, 2))
    with pytest.raises(ValueError):
        TangentPair(GridField.one_form(dom, one, 0.0), GridField.one_form(dom, one, 0.0))


def test_report_round_trip(s3_family):
    rep = energy(s3_family)
    back = EnergyReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    assert rep.quad_err < 1e-12


def test_strip_energy_sign(strip_solution):
    E = energy(family_from_uq(strip_solution)).energy
    assert E.real < 0 and abs(E.imag) < 1e-12
    sol = SolutionData(strip_solution.domain, strip_solution.u, strip_solution.q, "H3")
    assert energy(family_from_uq(sol)).energy == E
