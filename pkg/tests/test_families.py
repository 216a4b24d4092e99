import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tracefree
from lambdalab.builders import random_lift_perturbation, random_sl2_field
from lambdalab.families import (GaugeFamily, IndeterminateWindingError, LambdaFamily, PoleError,
                                SingularGaugeError, det_winding, evaluate, families_close,
                                flatness_residual, gauge_apply, parity, sigma_map, sigma_pullback,
                                substitute_lambda_squared)
from lambdalab.grid import Domain, GridField, derive, matmul

SAMPLES = [0.7 + 0.2j, -1.3j, 0.4 - 0.9j, 2.0, -0.6 + 0.6j, 1.1 * np.exp(2.2j), 0.5j, -1.7]


def random_family(dom, rng, kmin=-1, kmax=1):
    arrays = {k: (random_tracefree(dom.shape, rng), random_tracefree(dom.shape, rng))
              for k in range(kmin, kmax + 1)}
    return LambdaFamily.from_arrays(dom, arrays, higgs_type=False)


def pure_gauge_form(dom, g):
    d = derive(GridField.zero_form(dom, g))
    gi = np.linalg.inv(g)
    return GridField(dom, 1, (matmul(gi, d.dz), matmul(gi, d.dzbar)))


def test_zero_family_is_flat():
    dom = Domain.torus(16)
    fam = LambdaFamily(dom, {0: GridField.zeros(dom, 1)})
    assert max(flatness_residual(fam).values()) == 0


def test_pure_gauge_is_flat():
    dom = Domain.torus(64)
    g = random_sl2_field(dom, 7, amplitude=0.2)
    fam = LambdaFamily(dom, {0: pure_gauge_form(dom, g)}, higgs_type=False)
    assert max(flatness_residual(fam).values()) < 1e-10


def test_s3_family_flat(s3_family):
    assert max(flatness_residual(s3_family).values()) < 1e-12


def test_trace_free_enforced():
    dom = Domain.torus(8)
    with pytest.raises(ValueError):
        LambdaFamily.from_arrays(dom, {0: (np.eye(2), 0.0)})


def test_higgs_purity_enforced():
    dom = Domain.torus(8)
    e12 = np.array([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        LambdaFamily.from_arrays(dom, {-1: (e12, e12)}, higgs_type=True)


def test_evaluate_basics():
    dom = Domain.torus(8)
    rng = np.random.default_rng(0)
    fam = random_family(dom, rng, 0, 0)
    assert np.abs(evaluate(fam, 3.7 - 1j).dz - fam.coefficient(0).dz).max() == 0
    fam = random_family(dom, rng)
    total = sum(fam.coeffs.values(), GridField.zeros(dom, 1))
    assert np.abs(evaluate(fam, 1.0).dzbar - total.dzbar).max() < 1e-14
    with pytest.raises(PoleError):
        evaluate(fam, 0.0)


def test_identity_gauge(s3_family):
    out = gauge_apply(s3_family, GaugeFamily.identity(s3_family.domain))
    assert families_close(out, s3_family) < 1e-15


def test_constant_gauge_conjugates(s3_family):
    dom = s3_family.domain
    g = np.array([[1.0, 0.5], [0.2, 1.1]])
    out = gauge_apply(s3_family, GaugeFamily.constant(dom, g))
    gi = np.linalg.inv(g)
    for k, c in s3_family.coeffs.items():
        assert np.abs(out.coefficient(k).dz - gi @ c.dz @ g).max() < 1e-13
        assert np.abs(out.coefficient(k).dzbar - gi @ c.dzbar @ g).max() < 1e-13


def test_gauge_round_trip(s3_family):
    g = random_lift_perturbation(s3_family.domain, 1, K=6)
    there = gauge_apply(s3_family, g)
    # the inverse series must reach one power beyond the kept range (xi starts at lambda^-1)
    back = gauge_apply(there, g.inverse(order=12), order=6)
    for k in range(-1, 6):
        assert (back.coefficient(k) - s3_family.coefficient(k)).sup_norm() < 1e-10


def test_gauge_composition(s3_family):
    dom = s3_family.domain
    g1 = random_lift_perturbation(dom, 2, K=3)
    g2 = GaugeFamily.constant(dom, random_sl2_field(dom, 3, amplitude=0.1))
    seq = gauge_apply(gauge_apply(s3_family, g1), g2)
    once = gauge_apply(s3_family, g1.compose(g2))
    for k in range(-1, 5):
        assert (seq.coefficient(k) - once.coefficient(k)).sup_norm() < 1e-10


def test_gauge_keeps_flatness(s3_family):
    g = random_lift_perturbation(s3_family.domain, 4, K=6)
    out = gauge_apply(s3_family, g)
    res = flatness_residual(out)
    # curvature coefficients that only see retained terms stay flat
    assert max(v for k, v in res.items() if k <= out.kmax - 1) < 1e-10


def test_singular_gauge_names_point():
    dom = Domain.torus(8)
    g = np.broadcast_to(np.eye(2, dtype=complex), dom.shape + (2, 2)).copy()
    g[3, 4] = [[1, 0], [0, 0]]
    fam = LambdaFamily(dom, {0: GridField.zeros(dom, 1)})
    with pytest.raises(SingularGaugeError, match=r"\(3, 4\)"):
        gauge_apply(fam, GaugeFamily(dom, {0: g}))


def test_series_and_interpolated_inverse():
    dom = Domain.torus(8)
    g = random_lift_perturbation(dom, 5, K=2)
    inv = g.inverse(order=12)
    # power series: g * g^-1 = Id coefficient by coefficient up to the inverse order
    prod = g.compose(inv, order=12)
    for k in range(13):
        target = np.eye(2) if k == 0 else 0.0
        assert np.abs(prod.coeffs.get(k, 0.0) - target).max() < 1e-12
    # a Laurent gauge: diag(lambda^-1, 1) conjugated by a smooth field
    s = random_sl2_field(dom, 6)
    si = np.linalg.inv(s)
    p = matmul(s, matmul(np.diag([1.0, 0.0]), si))
    h = GaugeFamily(dom, {-1: p, 0: np.eye(2) - p})
    hinv = h.inverse()
    for lam in (1.0, np.exp(1j), 0.9 * np.exp(-2j)):
        assert np.abs(matmul(h.evaluate(lam), hinv.evaluate(lam)) - np.eye(2)).max() < 1e-10


def test_sigma_involutions_fix_built_families(strip_family, s3_family):
    assert families_close(sigma_pullback(strip_family, "tau"), strip_family) < 1e-12
    assert families_close(sigma_pullback(s3_family, "rho"), s3_family) < 1e-12


def test_N_is_an_involution():
    rng = np.random.default_rng(1)
    fam = random_family(Domain.torus(8), rng, -2, 3)
    assert families_close(sigma_pullback(sigma_pullback(fam, "N"), "N"), fam) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["tau", "rho", "N"]))
def test_sigma_pullback_evaluation_identity(seed, sigma):
    rng = np.random.default_rng(seed)
    fam = random_family(Domain.torus(8), rng, -2, 2)
    pulled = sigma_pullback(fam, sigma)
    for lam in SAMPLES:
        lhs = evaluate(pulled, lam)
        ref = evaluate(fam, sigma_map(sigma, lam))
        if sigma == "N":
            rhs = ref
        else:
            rhs = -1 * ref.conj_transpose()
        assert (lhs - rhs).sup_norm() < 1e-12 * max(1.0, ref.sup_norm())


def test_substitute_lambda_squared():
    rng = np.random.default_rng(2)
    dom = Domain.torus(8)
    fam = random_family(dom, rng)
    sq = substitute_lambda_squared(fam)
    assert set(sq.coeffs) == {-2, 0, 2}
    for lam in SAMPLES:
        assert (evaluate(sq, lam) - evaluate(fam, lam**2)).sup_norm() < 1e-12 * 20
    only0 = random_family(dom, rng, 0, 0)
    assert families_close(substitute_lambda_squared(only0), only0) == 0


def test_det_winding_examples():
    dom = Domain.torus(8)
    one = np.eye(2)
    e11, e22 = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert det_winding(GaugeFamily.identity(dom)) == 0
    assert det_winding(GaugeFamily(dom, {1: e11, 0: e22})) == 1
    assert det_winding(GaugeFamily(dom, {2: e11, -1: e22})) == 1
    assert parity(GaugeFamily(dom, {2: e11, -1: e22})) == 1
    with pytest.raises(IndeterminateWindingError):
        det_winding(GaugeFamily(dom, {1: e11, 0: one - 2 * e11}))  # det = lambda - 1 vanishes at lambda = 1


def test_det_winding_additive():
    dom = Domain.torus(8)
    e11, e22 = np.diag([1.0, 0]), np.diag([0, 1.0])
    for seed in range(4):
        g0 = random_lift_perturbation(dom, seed, K=2, amplitude=0.05)
        w0 = det_winding(g0)
        lam_gauge = GaugeFamily(dom, {1: e11, 0: e22})
        assert w0 == 0
        assert det_winding(g0.compose(lam_gauge)) == w0 + 1
