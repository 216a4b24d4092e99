"""The verification suite: one numbered criterion per identity, each a set of rows.

A row compares a measured number against a tolerance; a criterion passes
when all of its rows pass and it finished inside its time budget.
"""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from unittest import mock

import numpy as np

from . import builders
from . import lightcone as lc
from .builders import (constant_solution, random_lift_perturbation, random_sl2_field,
                       solve_gordon_strip, strip_minimum)
from .energy import TangentPair, energy, energy_density, energy_sigma, moment_map, residue_rhs
from .families import GaugeFamily, LambdaFamily, flatness_residual, gauge_apply
from .grid import Domain, GridField, density, derive, integrate_density, matmul
from .transforms import (dual_surface, kernel_splitting, line_curvature_integral, line_degree,
                         twist, twist_block_identity)

STRIP_Q = 0.1
UNIT_CIRCLE_8 = np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)
# off the unit circle, so that the lambda-involutions move every sample
OFF_CIRCLE_8 = np.array([r * np.exp(1j * a) for r, a in
                         zip([0.6, 0.8, 1.25, 1.5, 0.7, 1.1, 0.9, 1.4],
                             [0.3, 1.1, 1.9, 2.6, 3.5, 4.2, 5.0, 5.8])])


@dataclass
class Row:
    label: str
    value: float
    tol: float
    mode: str = "below"  # below: value < tol; above: value > tol

    @property
    def passed(self):
        if not np.isfinite(self.value):
            return False
        return bool(self.value < self.tol if self.mode == "below" else self.value > self.tol)

    def to_dict(self):
        return {"label": self.label, "value": float(self.value), "tol": float(self.tol),
                "mode": self.mode, "pass": self.passed}


@dataclass
class CriterionResult:
    number: int
    title: str
    budget: float
    rows: list = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None

    @property
    def passed(self):
        return (self.error is None and bool(self.rows)
                and all(r.passed for r in self.rows) and self.seconds <= self.budget)

    @property
    def worst(self):
        """The failing row, or the row with the smallest safety factor."""
        if not self.rows:
            return None
        failing = [r for r in self.rows if not r.passed]
        if failing:
            return failing[0]

        def margin(r):
            if r.mode == "below":
                return r.value / r.tol if r.tol else math.inf
            return r.tol / r.value if r.value else math.inf
        return max(self.rows, key=margin)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        w = self.worst
        if self.error:
            detail = f"error: {self.error}"
        elif self.seconds > self.budget:
            detail = f"runtime {self.seconds:.1f}s over budget {self.budget:.0f}s"
        else:
            detail = f"{w.label} = {w.value:.3g} (tol {w.tol:.1g})" if w else ""
        return f"[{self.number:2d}] {self.title}: {status}  {detail}"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "pass": self.passed,
                "budget_s": self.budget, "error": self.error,
                "rows": [r.to_dict() for r in self.rows]}


class ResultCache:
    """Shared expensive objects (strip solutions, frames) within one suite run."""

    def __init__(self):
        self._d = {}

    def get(self, key, make):
        if key not in self._d:
            self._d[key] = make()
        return self._d[key]

    def strip(self, n, substeps=None):
        return self.get(("strip", n, substeps), lambda: solve_gordon_strip(
            STRIP_Q, strip_minimum(STRIP_Q), 0.0, n=n, substeps=substeps))

    def strip_family(self, n):
        return self.get(("strip-fam", n),
                        lambda: builders.family_from_uq(self.strip(n), label=f"H3 strip n={n}"))

    def s3_torus(self, n=64, q0=1.0):
        def make():
            return builders.family_from_uq(constant_solution(Domain.torus(n), q0, "S3"),
                                           label=f"S3 constant q={q0}")
        return self.get(("s3", n, q0), make)

    def s3_gauged(self, n=64, seed=11):
        """The constant S3 family moved by a lambda-independent spatial gauge, so
        that its kernel line bundle carries pointwise nonzero curvature."""
        def make():
            fam = self.s3_torus(n)
            g0 = GaugeFamily.constant(fam.domain, random_sl2_field(fam.domain, seed, amplitude=0.1))
            return gauge_apply(fam, g0).replace(higgs_type=True, label="S3 constant, gauged")
        return self.get(("s3g", n, seed), make)

    def lightcone(self, n):
        def make():
            fam = self.strip_family(n)
            Fp, Fm = lc.integrate_frame(fam, 1.0), lc.integrate_frame(fam, -1.0)
            return Fp, Fm, lc.embed_hatf(Fp, Fm)
        return self.get(("lc", n), make)


def _higgs_split(fam):
    return kernel_splitting(fam.coefficient(-1).part("10"))


# ---------------------------------------------------------------------------
# criteria

def c1_energy_invariance(cache, level):
    fam = cache.s3_torus(64)
    dom = fam.domain
    energies = [energy(fam).energy]
    for seed in range(100):
        lift = random_lift_perturbation(dom, seed, K=6, order=3)
        g0 = GaugeFamily.constant(dom, random_sl2_field(dom, 10_000 + seed))
        # energy only reads coefficients up to lambda^1, which depend on g mod lambda^3
        g = g0.compose(lift, order=3)
        energies.append(energy(gauge_apply(fam, g, order=2)).energy)
    energies = np.array(energies)
    spread = np.abs(energies - energies[0]).max() / abs(energies[0])
    return [Row("relative spread of E over 100 lift gauges", spread, 1e-9)]


def c2_sign(cache, level):
    rows = []
    es = [energy(cache.s3_torus(64, q0)).energy.real for q0 in (1.0, 0.5, 2.0, 1 + 1j, -0.3j)]
    rows.append(Row("min E over S3 families (must be > 0)", min(es), 1e-12, "above"))
    fam = cache.strip_family(128)
    dens = density(energy_density(fam)).real
    rows.append(Row("max H3 energy integrand (must be < 0)", dens.max(), -1e-12))
    rows.append(Row("E of H3 strip (must be < 0)", energy(fam).energy.real, -1e-12))
    return rows


def _random_shaped_family(dom, rng):
    """Laurent range [-1, 1]: (1,0) leading term, (0,1) last term, generic middle."""
    def field_():
        seed = int(rng.integers(2**31))
        return builders._random_tracefree_field(dom, np.random.default_rng(seed), 1, 0.5)
    z = np.zeros(dom.shape + (2, 2), complex)
    return LambdaFamily.from_arrays(dom, {-1: (field_(), z), 0: (field_(), field_()),
                                          1: (z, field_())}, label="random shape")


def c3_reality(cache, level):
    s3 = cache.s3_torus(64)
    h3 = cache.strip_family(128)
    tw = twist(s3, _higgs_split(s3))
    im = max(abs(energy(f).energy.imag) for f in (s3, h3, tw))
    rng = np.random.default_rng(2024)
    dom = Domain.torus(32)
    dev = 0.0
    for i in range(20):
        fam = _random_shaped_family(dom, rng)
        sigma = ("tau", "rho")[i % 2]
        dev = max(dev, abs(energy_sigma(fam, sigma) - np.conj(energy(fam).energy)))
    return [Row("|Im E| on sigma-real families", im, 1e-10),
            Row("|E(sigma* s) - conj E(s)| over 20 random families", dev, 1e-10)]


def c4_twist(cache, level):
    rows = []
    for tag, fam in (("constant", cache.s3_torus(64)), ("gauged", cache.s3_gauged(64))):
        split = _higgs_split(fam)
        tw = twist(fam, split)
        E, Et = energy(fam).energy, energy(tw).energy
        deg = line_degree(fam, split)
        rows += [Row(f"|E(twist) - (2E - deg L)|, {tag} S3", abs(Et - (2 * E - deg)), 1e-8),
                 Row(f"distance of deg L from an integer, {tag} S3", abs(deg - round(deg)), 1e-6),
                 Row(f"|deg L| on torus data, {tag} S3", abs(deg), 1e-6),
                 Row(f"sup of L-block curvature identity, {tag} S3",
                     twist_block_identity(tw, split), 1e-8)]
    return rows


def c5_dual(cache, level):
    rows = []
    for tag, fam in (("constant", cache.s3_torus(64)), ("gauged", cache.s3_gauged(64))):
        split = _higgs_split(fam)
        E = energy(fam).energy
        deg = line_degree(fam, split)
        Ed = energy(dual_surface(fam, split)).energy
        rows.append(Row(f"|E(dual) - (E - deg L)|, {tag} S3 torus", abs(Ed - (E - deg)), 1e-8))
    n = 256 if level == "full" else 128
    h3 = cache.strip_family(n)
    sp_ = _higgs_split(h3)
    c = line_curvature_integral(h3, sp_)
    Eh, Ehd = energy(h3).energy, energy(dual_surface(h3, sp_)).energy
    rows.append(Row(f"|E(dual) - (E - int F^L)| on H3 strip n={n}", abs(Ehd - (Eh - c)), 1e-8))
    Et = energy(twist(fam, split)).energy.real
    rows.append(Row("E(twist) - |deg L| on S3 data (must be > 0)", Et - abs(deg), 0.0, "above"))
    return rows


def c6_residue(cache, level):
    dom = Domain.torus(32)
    rng = np.random.default_rng(77)
    worst = 0.0
    degenerate = 0.0
    z = np.zeros(dom.shape + (2, 2), complex)
    for _ in range(50):
        a = builders._random_tracefree_field(dom, np.random.default_rng(rng.integers(2**31)), 1, 0.5)
        c = builders._random_tracefree_field(dom, np.random.default_rng(rng.integers(2**31)), 1, 0.5)
        phi = GridField.one_form(dom, a, 0.0, dim=2)
        lift = TangentPair.from_arrays(dom, c, a)
        ref = TangentPair(phi.conj_transpose(), phi)
        mu = moment_map(phi)
        E = energy(LambdaFamily.from_arrays(dom, {-1: (a, z), 1: (z, c)})).energy
        rhs = 1j / (2 * np.pi) * residue_rhs(phi, lift, ref, mu)
        worst = max(worst, abs(E - rhs) / max(1.0, abs(E)))
        degenerate = max(degenerate, abs(residue_rhs(phi, ref, ref, mu) - mu))
    return [Row("max |E - (i/2pi) residue rhs| over 50 draws", worst, 1e-10),
            Row("|residue rhs - mu| for the twistor-line lift", degenerate, 1e-300)]


def c7_lightcone(cache, level):
    sol = cache.strip(128)
    fam = cache.strip_family(128)
    Fp, Fm, hf = cache.lightcone(128)
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, size=(1000, 5))
    iso = np.abs(lc.minkowski_q(lc.isometry_psi(x)) - np.einsum("ni,ij,nj->n", x, lc.ETA, x)).max()
    famhat = dual_surface(fam, _higgs_split(fam))
    return [Row("sup |q(f^)|", float(np.abs(lc.minkowski_q(hf)).max()), 1e-8),
            Row("isometry defect on 1000 random vectors", float(iso), 1e-14),
            Row("frame reality defect", lc.frame_reality_defect(fam, 0.8 + 0.45j), 1e-7),
            Row("psi-frame connection vs closed form (8 lambdas)",
                lc.so5_connection_check(sol, Fp, UNIT_CIRCLE_8), 1e-5),
            Row("dual-surface connection vs closed form (8 lambdas)",
                lc.dual_so5_equivalence(famhat, sol, UNIT_CIRCLE_8), 1e-6)]


def c8_willmore(cache, level, csv_path=None):
    sol = cache.strip(128)
    fam = cache.strip_family(128)
    Fp, Fm, hf = cache.lightcone(128)
    famhat = dual_surface(fam, _higgs_split(fam))
    rep = lc.willmore_compare(sol, famhat, hf)
    if csv_path is not None:
        rep.write_csv(csv_path)
    dev = rep.deviations()
    _, sig, e4 = lc.mean_curvature_sphere(sol.domain, hf)
    idx = sol.domain.interior()
    bad = int(np.sum(np.any(sig[idx] != (3, 1), axis=-1)))
    geo = lc.surface_geometry(sol.domain, hf)
    area = integrate_density(sol.domain, geo["dA"]).real
    E = energy(fam).energy.real
    W = integrate_density(sol.domain, rep.frame).real
    Ehat = energy(famhat).energy.real
    return [Row("algebraic vs dual-family integrand", dev["algebraic_vs_frame"], 1e-10),
            Row("geometric vs algebraic integrand (interior)", dev["geometric_vs_algebraic"], 1e-4),
            Row("sup |H| (interior)", dev["mean_curvature"], 1e-4),
            Row("induced metric / e^{2u} spread", dev["metric"], 1e-5),
            Row("points where the sphere signature is not (3,1)", bad, 0.5),
            Row("sup distance of (0,1) from the sphere", float(e4[idx].max()), 1e-6),
            Row("|Area + 4 pi E| / Area", abs(area + 4 * np.pi * E) / area, 1e-4),
            Row("|int W - 4 pi E(dual)|", abs(W - 4 * np.pi * Ehat), 1e-4)]


def c9_fingerprints(cache, level):
    fam = cache.s3_torus(64)
    tw = twist(fam, _higgs_split(fam))
    return [Row("rho fingerprint on the S3 family", lc.fingerprint_defect(fam, "rho", OFF_CIRCLE_8), 1e-7),
            Row("tau fingerprint on its twist", lc.fingerprint_defect(tw, "tau", OFF_CIRCLE_8), 1e-7),
            Row("N fingerprint on its twist", lc.fingerprint_defect(tw, "N", OFF_CIRCLE_8), 1e-7)]


def _order(errs, hs):
    """Smallest observed order over consecutive refinements."""
    return min(math.log(errs[i] / errs[i + 1]) / math.log(hs[i] / hs[i + 1])
               for i in range(len(errs) - 1))


def pure_gauge_family(dom, seed=3):
    """``xi = -dg g^{-1}``, whose parallel frame is ``g g(base)^{-1}``."""
    g = random_sl2_field(dom, seed)
    dg = derive(GridField.zero_form(dom, g))
    gi = np.linalg.inv(g)
    xi = GridField(dom, 1, (-matmul(dg.dz, gi), -matmul(dg.dzbar, gi)))
    return LambdaFamily(dom, {0: xi}, higgs_type=False, label="pure gauge"), g


def convergence_data(ns=(64, 128, 256), geo_ns=(64, 128), gauge_ns=(32, 64, 128)):
    """Errors and grid steps of the refinement studies."""
    out = {}
    flat, path, hs = [], [], []
    for n in ns:
        sol = solve_gordon_strip(STRIP_Q, strip_minimum(STRIP_Q), 0.0, n=n, substeps=16)
        fam = builders.family_from_uq(sol)
        flat.append(max(flatness_residual(fam).values()))
        path.append(lc.integrate_frame(fam, 1.0).path_residual)
        hs.append(sol.domain.spacing[0])
    out["flatness"] = (flat, hs)
    out["transport path"] = (path, hs)
    geo, ghs = [], []
    for n in geo_ns:
        sol = solve_gordon_strip(STRIP_Q, strip_minimum(STRIP_Q), 0.0, n=n, substeps=16)
        fam = builders.family_from_uq(sol)
        Fp, Fm = lc.integrate_frame(fam, 1.0), lc.integrate_frame(fam, -1.0)
        rep = lc.willmore_compare(sol, dual_surface(fam, _higgs_split(fam)), lc.embed_hatf(Fp, Fm))
        geo.append(rep.deviations()["geometric_vs_algebraic"])
        ghs.append(sol.domain.spacing[0])
    out["geometric integrand"] = (geo, ghs)
    err, ths = [], []
    for n in gauge_ns:
        fam, g = pure_gauge_family(Domain.torus(n))
        F = lc.integrate_frame(fam, 1.0, max_residual=np.inf)
        err.append(float(np.abs(F.F - matmul(g, np.linalg.inv(g[0, 0]))).max()))
        ths.append(1.0 / n)
    out["pure-gauge transport"] = (err, ths)
    return out


def c10_convergence(cache, level):
    rows = []
    for name, (errs, hs) in convergence_data().items():
        rows.append(Row(f"observed order of {name} (>= 3 means >= 8x per halving)",
                        _order(errs, hs), 3.0, "above"))
    return rows


CRITERIA = [
    (1, "energy gauge invariance", 10, c1_energy_invariance),
    (2, "energy sign dichotomy", 5, c2_sign),
    (3, "energy reality under involutions", 10, c3_reality),
    (4, "twist energy relation E(twist) = 2E - deg L", 20, c4_twist),
    (5, "dual-surface energy relation E(dual) = E - deg L", 20, c5_dual),
    (6, "residue identity for the energy", 10, c6_residue),
    (7, "lightcone model and SO(4,1) frame connection", 60, c7_lightcone),
    (8, "Willmore integrand and mean curvature sphere", 120, c8_willmore),
    (9, "reality fingerprints under twisting", 30, c9_fingerprints),
    (10, "grid-refinement convergence orders", 600, c10_convergence),
]


def run_criterion(number, cache=None, level="full", **kw) -> CriterionResult:
    cache = cache if cache is not None else ResultCache()
    num, title, budget, fn = next(c for c in CRITERIA if c[0] == number)
    res = CriterionResult(num, title, budget)
    t0 = time.perf_counter()
    try:
        res.rows = fn(cache, level, **kw)
    except Exception as exc:  # a crash is a failed check, reported with its message
        res.error = f"{type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - t0
    return res


def verify_suite(level="fast", numbers=None, echo=None) -> list[CriterionResult]:
    """Run the criteria; ``fast`` skips the refinement studies."""
    if level not in ("fast", "full"):
        raise ValueError(f"unknown level {level!r}")
    if numbers is None:
        numbers = [c[0] for c in CRITERIA if level == "full" or c[0] != 10]
    cache = ResultCache()
    out = []
    for n in numbers:
        res = run_criterion(n, cache, level)
        if echo:
            echo(res.line())
        out.append(res)
    return out


@contextmanager
def mutation(name):
    """Deliberately break the build to check that the suite notices.

    ``s3-sign`` flips the sign of the lambda^1 term of three-sphere families.
    """
    if name != "s3-sign":
        raise ValueError(f"unknown mutation {name!r}")
    original = builders.family_from_uq

    def broken(sol, label=""):
        fam = original(sol, label)
        if sol.target == "S3":
            fam = fam.replace(coeffs={**fam.coeffs, 1: -1 * fam.coeffs[1]})
        return fam

    with mock.patch.object(builders, "family_from_uq", broken):
        yield
