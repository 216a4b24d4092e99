"""Flat lambda-families built from SU(2)-frame data ``(u, q)``.

The frame data describe a conformal harmonic map with metric ``e^{2u} dz dzbar``
and Hopf differential ``q dz^2``.  For the hyperbolic target the family is
``lambda^{-1} Phi + nabla + lambda Phi^*`` (self-duality shape); for the
three-sphere target the lambda-term carries the opposite sign.

The scalar equations the solvers integrate are not typed in by hand: they are
read off the lambda^0 flatness coefficient, expanded symbolically with sympy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
import sympy as sp

from .families import DEFAULT_ORDER, GaugeFamily, LambdaFamily, _conv, sl2_exp
from .grid import ConfigurationError, Domain, GridField, dz_dzbar

Target = Literal["H3", "S3"]
BLOWUP = 20.0
MIN_STEPS = 256


class NoConstantSolutionError(ValueError):
    pass


class DegenerateDataError(ValueError):
    pass


class PartialSolutionError(RuntimeError):
    def __init__(self, msg, achieved):
        super().__init__(msg)
        self.achieved = achieved


def _lambda_sign(target):
    if target == "H3":
        return 1.0
    if target == "S3":
        return -1.0
    raise ConfigurationError(f"unknown target {target!r}")


@dataclass(frozen=True)
class SolutionData:
    domain: Domain
    u: np.ndarray
    q: np.ndarray
    target: Target = "H3"
    check: bool = True

    def __post_init__(self):
        _lambda_sign(self.target)
        u = np.broadcast_to(np.asarray(self.u), self.domain.shape)
        q = np.array(np.broadcast_to(np.asarray(self.q, complex), self.domain.shape))
        if self.check:
            if np.abs(np.imag(u)).max() > 1e-12:
                raise ValueError("conformal factor u must be real")
            _, qzb = dz_dzbar(self.domain, q)
            if np.abs(qzb).max() > 1e-10 * max(1.0, np.abs(q).max()):
                raise ValueError("Hopf differential coefficient q is not holomorphic")
        u = np.array(np.real(u), float)
        u.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "q", q)

    @property
    def u_field(self):
        return GridField.zero_form(self.domain, self.u)

    @property
    def q_field(self):
        return GridField.zero_form(self.domain, self.q)


def family_from_uq(sol: SolutionData, label="") -> LambdaFamily:
    """The 3-term family ``xi_{-1} + xi_0 + xi_1`` of the SU(2)-frame."""
    dom, u, q = sol.domain, sol.u, sol.q
    uz, uzb = dz_dzbar(dom, u.astype(complex))
    eu, emu = np.exp(u), np.exp(-u)
    z = np.zeros(dom.shape + (2, 2), complex)

    am1 = z.copy()
    am1[..., 0, 1] = eu

    a0, b0 = z.copy(), z.copy()
    a0[..., 0, 0], a0[..., 1, 1] = uz / 2, -uz / 2
    a0[..., 1, 0] = emu * q
    b0[..., 0, 0], b0[..., 1, 1] = -uzb / 2, uzb / 2
    b0[..., 0, 1] = -emu * np.conj(q)

    b1 = z.copy()
    b1[..., 1, 0] = _lambda_sign(sol.target) * eu

    coeffs = {-1: GridField(dom, 1, (am1, z)),
              0: GridField(dom, 1, (a0, b0)),
              1: GridField(dom, 1, (z, b1))}
    return LambdaFamily(dom, coeffs, higgs_type=True,
                        label=label or f"{sol.target}-frame")


# ---------------------------------------------------------------------------
# symbolic lambda^0 flatness coefficient

@lru_cache(maxsize=None)
def _lambda0_entry(target):
    """(1,1)-entry of the lambda^0 curvature for y-independent data u(x), constant q."""
    x = sp.Symbol("x", real=True)
    qa, qb = sp.symbols("qa qb", real=True)
    U = sp.Function("U")(x)
    q, qbar = qa + sp.I * qb, qa - sp.I * qb
    dz = lambda f: sp.diff(f, x) / 2  # noqa: E731  (y-independent)
    dzb = dz
    e = sp.exp
    am1 = sp.Matrix([[0, e(U)], [0, 0]])
    a0 = sp.Matrix([[dz(U) / 2, 0], [e(-U) * q, -dz(U) / 2]])
    b0 = sp.Matrix([[-dzb(U) / 2, -e(-U) * qbar], [0, dzb(U) / 2]])
    b1 = sp.Matrix([[0, 0], [int(_lambda_sign(target)) * e(U), 0]])
    # wedge(a, b) = a_z b_zbar - a_zbar b_z
    curv = (b0.applyfunc(dz) - a0.applyfunc(dzb) + a0 * b0 - b0 * a0
            + am1 * b1 - b1 * am1)
    return x, U, qa, qb, sp.simplify(curv[0, 0])


@lru_cache(maxsize=None)
def strip_rhs(target="H3"):
    """Numeric ``u'' = f(u, |q|^2)`` for y-independent solutions.

    Returns ``(f, expr)`` with ``f(u, qsq)`` vectorised and ``expr`` the sympy
    right-hand side in the symbols ``u`` and ``qsq``.
    """
    x, U, qa, qb, entry = _lambda0_entry(target)
    upp = sp.Symbol("upp")
    us, qsq = sp.symbols("u qsq", real=True)
    entry = entry.subs(sp.Derivative(U, (x, 2)), upp).subs(U, us)
    sol = sp.solve(sp.Eq(entry, 0), upp)
    if len(sol) != 1:
        raise RuntimeError("lambda^0 flatness is not linear in u''")
    expr = sp.simplify(sol[0].subs(qb**2, qsq - qa**2))
    expr = sp.simplify(expr.subs(qa**2 + qb**2, qsq))
    return sp.lambdify((us, qsq), expr, "numpy"), expr


@lru_cache(maxsize=None)
def constant_residual(target):
    """Scalar lambda^0 flatness residual g(u, |q|^2) for constant data, and dg/du."""
    x, U, qa, qb, entry = _lambda0_entry(target)
    us, qsq = sp.symbols("u qsq", real=True)
    expr = entry.subs(sp.Derivative(U, (x, 2)), 0).subs(sp.Derivative(U, x), 0).subs(U, us)
    expr = sp.simplify(sp.expand(expr).subs(qb**2, qsq - qa**2))
    return (sp.lambdify((us, qsq), expr, "numpy"),
            sp.lambdify((us, qsq), sp.diff(expr, us), "numpy"))


def solve_constant(q0, target: Target = "S3", bracket=(-10.0, 10.0), tol=1e-14) -> float:
    """Constant conformal factor u0 making the constant-(u0, q0) family flat."""
    _lambda_sign(target)
    if target == "H3":
        raise NoConstantSolutionError(
            "the hyperbolic Gauss equation has no constant solution (maximum principle)")
    q0 = complex(q0)
    if abs(q0) == 0:
        raise DegenerateDataError("q0 = 0 gives no constant solution")
    g, dg = constant_residual(target)
    qsq = abs(q0) ** 2
    lo, hi = bracket
    glo, ghi = g(lo, qsq), g(hi, qsq)
    if np.sign(glo) == np.sign(ghi):
        raise NoConstantSolutionError(f"no sign change of the residual on {bracket}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid, qsq)
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    u = 0.5 * (lo + hi)
    for _ in range(50):  # Newton polish
        step = g(u, qsq) / dg(u, qsq)
        u -= step
        if abs(step) < tol and abs(g(u, qsq)) < tol:
            break
    return float(u)


def constant_solution(domain, q0, target: Target = "S3") -> SolutionData:
    u0 = solve_constant(q0, target)
    return SolutionData(domain, np.full(domain.shape, u0), np.full(domain.shape, complex(q0)), target)


def _rk4(f, y, h, n):
    """n RK4 steps for the first-order system y' = f(y); returns the end state."""
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def solve_gordon_strip(q0, u_init, du_init, target: Target = "H3", x_range=(-0.5, 0.5),
                       n=128, y_range=None, ny=None, substeps=None) -> SolutionData:
    """y-independent solution of the Gauss equation on a rectangular strip.

    ``u_init``/``du_init`` are the values at the left end of ``x_range``;
    the ODE is integrated with RK4, using ``substeps`` internal steps per
    grid interval so that at least 256 steps are taken in total.
    """
    if target != "H3":
        raise ConfigurationError("strip solver is implemented for the H3 target")
    x0, x1 = map(float, x_range)
    if y_range is None:
        y_range = (0.0, (x1 - x0) / 4)
    if ny is None:
        ny = max(8, 2 * (n // 8))
    dom = Domain.patch((x0, x1), y_range, (n, ny))
    if substeps is None:
        substeps = -(-MIN_STEPS // (n - 1))
    if (n - 1) * substeps < MIN_STEPS:
        raise ConfigurationError(f"need at least {MIN_STEPS} integration steps")
    rhs, _ = strip_rhs(target)
    qsq = abs(complex(q0)) ** 2
    f = lambda y: np.array([y[1], rhs(y[0], qsq)])  # noqa: E731
    h = (x1 - x0) / (n - 1) / substeps
    xs = np.linspace(x0, x1, n)
    us = np.empty(n)
    y = np.array([float(u_init), float(du_init)])
    us[0] = y[0]
    for i in range(1, n):
        with np.errstate(over="ignore", invalid="ignore"):  # blow-up is reported below
            y = _rk4(f, y, h, substeps)
        if not np.all(np.isfinite(y)) or abs(y[0]) > BLOWUP:
            raise PartialSolutionError(
                f"solution blew up near x = {xs[i]:.4g}", achieved=(x0, float(xs[i - 1])))
        us[i] = y[0]
    u = np.repeat(us[:, None], ny, axis=1)
    return SolutionData(dom, u, np.full(dom.shape, complex(q0)), target)


def strip_minimum(q0, target: Target = "H3"):
    """Initial value where the strip right-hand side |u''| is smallest."""
    rhs, expr = strip_rhs(target)
    us, qsq = sp.symbols("u qsq", real=True)
    crit = sp.solve(sp.diff(expr, us).subs(qsq, abs(complex(q0)) ** 2), us)
    crit = [complex(c) for c in crit]
    real = [c.real for c in crit if abs(c.imag) < 1e-12]
    if not real:
        raise DegenerateDataError("reduced right-hand side has no critical point")
    return min(real, key=lambda v: abs(rhs(v, abs(complex(q0)) ** 2)))


# ---------------------------------------------------------------------------
# random gauges

_SL2_BASIS = np.array([[[1, 0], [0, -1]], [[0, 1], [0, 0]], [[0, 0], [1, 0]]], complex)


def _random_tracefree_field(domain, rng, modes, amplitude):
    s, t = domain.lattice()
    if not domain.is_torus:  # rescale patch coordinates to unit lengths
        s = (s - domain.x_range[0]) / (domain.x_range[1] - domain.x_range[0])
        t = (t - domain.y_range[0]) / (domain.y_range[1] - domain.y_range[0])
    ms = np.arange(-modes, modes + 1)
    waves = np.exp(2j * np.pi * (ms[:, None, None, None] * s + ms[None, :, None, None] * t))
    c = rng.normal(size=(len(ms), len(ms), 3)) + 1j * rng.normal(size=(len(ms), len(ms), 3))
    c *= amplitude / (1 + ms[:, None, None] ** 2 + ms[None, :, None] ** 2)
    # sum over modes (m, k) and sl(2) basis elements b
    return np.einsum("mkxy,mkb,bij->xyij", waves, c, _SL2_BASIS, optimize=True)


def random_lift_perturbation(domain, seed, K, amplitude=0.15, modes=1,
                             order=DEFAULT_ORDER + 1) -> GaugeFamily:
    """``g(lambda) = exp(sum_{k=1..K} lambda^k A_k)`` with ``g(0) = Id``.

    The ``A_k`` are smooth band-limited trace-free fields.  The exponential
    series is kept through lambda^order; with the default this reproduces the
    untruncated gauge action exactly in every coefficient up to
    :data:`DEFAULT_ORDER` (coefficient k only sees g_l for l <= k + 1).
    """
    if K == 0:
        return GaugeFamily.identity(domain)
    rng = np.random.default_rng(seed)
    A = {k: _random_tracefree_field(domain, rng, modes, amplitude) for k in range(1, K + 1)}
    eye = np.broadcast_to(np.eye(2, dtype=complex), domain.shape + (2, 2))
    g = {0: eye.copy()}
    power = {0: eye}
    for n in range(1, order + 1):  # lambda-degree of X^n is at least n
        power = _conv(power, A, order)
        for k, v in power.items():
            g[k] = g[k] + v / math.factorial(n) if k in g else v / math.factorial(n)
    return GaugeFamily(domain, g, label=f"random-lift(seed={seed}, K={K})")


def random_sl2_field(domain, seed, amplitude=0.3, modes=1):
    """Smooth lambda-independent SL(2,C)-valued field ``exp(B)``."""
    rng = np.random.default_rng(seed)
    return sl2_exp(_random_tracefree_field(domain, rng, modes, amplitude))
