import numpy as np
import pytest

from conftest import higgs_split, random_tracefree
from lambdalab.builders import random_sl2_field
from lambdalab.energy import energy
from lambdalab.families import (GaugeFamily, LambdaFamily, evaluate, families_close,
                                gauge_apply, substitute_lambda_squared)
from lambdalab.grid import Domain, GridField, matmul
from lambdalab.transforms import (LineSplitting, NotNilpotentError, NotTwistableError,
                                  UnsupportedDomainError, ZeroLocusError, dual_surface,
                                  kernel_splitting, line_curvature_integral, line_degree, twist,
                                  twist_block_identity)

LAMS = np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)


def _one_form(dom, A):
    return GridField.one_form(dom, np.broadcast_to(A, dom.shape + (2, 2)), 0.0, dim=2)


def test_kernel_of_upper_nilpotent():
    dom = Domain.torus(8)
    split = kernel_splitting(_one_form(dom, np.array([[0, 2.0], [0, 0]])))
    assert np.abs(split.p - np.diag([1, 0])).max() < 1e-15


def test_kernel_unitary_equivariance():
    dom = Domain.torus(8)
    rng = np.random.default_rng(1)
    U, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    A = np.array([[0, 1.5j], [0, 0]])
    split = kernel_splitting(_one_form(dom, U @ A @ U.conj().T))
    assert np.abs(split.p - U @ np.diag([1, 0]) @ U.conj().T).max() < 1e-14


def test_kernel_errors():
    dom = Domain.torus(8)
    with pytest.raises(NotNilpotentError):
        kernel_splitting(_one_form(dom, np.diag([1.0, -1.0])))
    s, _ = dom.lattice()
    A = np.zeros(dom.shape + (2, 2), complex)
    A[..., 0, 1] = np.sin(2 * np.pi * s)
    with pytest.raises(ZeroLocusError):
        kernel_splitting(GridField.one_form(dom, A, 0.0, dim=2))


def test_splitting_validation():
    dom = Domain.torus(8)
    with pytest.raises(ValueError):
        LineSplitting(dom, np.eye(2))
    with pytest.raises(ValueError):
        LineSplitting(dom, np.array([[1, 0], [0, 0.5]]))


def test_twist_without_higgs_is_substitution():
    dom = Domain.torus(16)
    rng = np.random.default_rng(2)
    xi1 = GridField.one_form(dom, random_tracefree(dom.shape, rng), random_tracefree(dom.shape, rng))
    fam = LambdaFamily(dom, {1: xi1})
    assert families_close(twist(fam, None), substitute_lambda_squared(fam)) == 0


def test_twist_evaluation_identity(s3_family):
    split = higgs_split(s3_family)
    tw = twist(s3_family, split)
    p, q = split.p, split.p_perp
    for lam in LAMS:
        # h = lambda^{-1} p + q is constant here, so only the conjugation remains
        h, hinv = p / lam + q, lam * p + q
        expect = evaluate(s3_family, lam**2).left(hinv).right(h)
        assert (evaluate(tw, lam) - expect).sup_norm() < 1e-12


def test_twist_shape(s3_family):
    tw = twist(s3_family, higgs_split(s3_family))
    assert tw.kmin == -1 and tw.higgs_type
    # the new lambda^-1 term is off-diagonal with respect to L + L'
    m1 = tw.coefficient(-1).dz
    assert np.abs(m1[..., 0, 0]).max() == 0 and np.abs(m1[..., 1, 1]).max() == 0


def test_relations_constant_s3(s3_family):
    split = higgs_split(s3_family)
    E = energy(s3_family).energy
    assert abs(line_degree(s3_family, split)) < 1e-14
    assert abs(energy(twist(s3_family, split)).energy - 2 * E) < 1e-12
    assert abs(energy(dual_surface(s3_family, split)).energy - E) < 1e-12
    assert twist_block_identity(twist(s3_family, split), split) < 1e-12


def test_relations_gauged_s3(s3_family):
    g0 = GaugeFamily.constant(s3_family.domain, random_sl2_field(s3_family.domain, 11, amplitude=0.1))
    fam = gauge_apply(s3_family, g0).replace(higgs_type=True)
    split = higgs_split(fam)
    E = energy(fam).energy
    deg = line_degree(fam, split)
    assert abs(deg - round(deg)) < 1e-8
    assert abs(energy(twist(fam, split)).energy - (2 * E - deg)) < 1e-10
    assert abs(energy(dual_surface(fam, split)).energy - (E - deg)) < 1e-10
    assert twist_block_identity(twist(fam, split), split) < 1e-8


def test_line_degree_needs_torus(strip_family):
    with pytest.raises(UnsupportedDomainError):
        line_degree(strip_family, higgs_split(strip_family))


def test_strip_dual_relation(strip_family):
    split = higgs_split(strip_family)
    E = energy(strip_family).energy
    c = line_curvature_integral(strip_family, split)
    assert abs(energy(dual_surface(strip_family, split)).energy - (E - c)) < 1e-8


def test_dual_round_trip(s3_family):
    split = higgs_split(s3_family)
    back = dual_surface(dual_surface(s3_family, split), split.swapped())
    assert abs(energy(back).energy - energy(s3_family).energy) < 1e-12


def test_wrong_splitting_rejected(s3_family):
    split = higgs_split(s3_family)
    with pytest.raises(ValueError):
        twist(s3_family, split.swapped())


def test_lower_tail_not_twistable(s3_family):
    dom = s3_family.domain
    extra = GridField.one_form(dom, np.broadcast_to(np.array([[0, 0], [1.0, 0]]), dom.shape + (2, 2)),
                               0.0)
    fam = s3_family.replace(coeffs={**s3_family.coeffs, -2: extra})
    with pytest.raises(NotTwistableError):
        twist(fam, higgs_split(s3_family))


def test_splitting_gauge_inverse():
    dom = Domain.torus(8)
    split = LineSplitting(dom, np.diag([1.0, 0.0]))
    h = split.gauge()
    for lam in LAMS[:3]:
        assert np.abs(matmul(h.evaluate(lam), h.inverse().evaluate(lam)) - np.eye(2)).max() < 1e-14
