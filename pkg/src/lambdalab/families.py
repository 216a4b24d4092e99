"""Laurent series in lambda of connection forms and gauge transformations.

A :class:`LambdaFamily` models ``d + xi(lambda)`` with
``xi(lambda) = sum_k lambda**k xi_k``; each ``xi_k`` is a trace-free 2x2
matrix-valued 1-form on a grid.  A :class:`GaugeFamily` is a Laurent series
of 2x2 matrix fields acting by ``xi -> g^{-1} xi g + g^{-1} dg``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from .grid import Domain, GridField, ShapeError, derive, exterior_derivative, matmul, wedge

DEFAULT_ORDER = 8
TRACE_TOL = 1e-10
PURITY_TOL = 1e-12


class PoleError(ValueError):
    pass


class SingularGaugeError(ValueError):
    pass


class IndeterminateWindingError(ValueError):
    pass


class InvalidFamilyError(ValueError):
    pass


def _conv(a: Mapping[int, np.ndarray], b: Mapping[int, np.ndarray], kmax=None):
    """Cauchy product of two Laurent series of pointwise matrices."""
    out: dict[int, np.ndarray] = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            if kmax is not None and k > kmax:
                continue
            p = matmul(x, y)
            out[k] = out[k] + p if k in out else p
    return out


def _product(series, kmax=None):
    """Left-to-right Cauchy product of several series, truncated above kmax."""
    out = series[0]
    rest_min = [sum(min(s) for s in series[i + 1:]) for i in range(len(series))]
    for i, s in enumerate(series[1:], start=1):
        # powers above kmax - (lowest power still to come) cannot come back down
        out = _conv(out, s, None if kmax is None else kmax - rest_min[i])
    return out


@dataclass(frozen=True)
class LambdaFamily:
    domain: Domain
    coeffs: Mapping[int, GridField] = field(repr=False)
    higgs_type: bool = True
    label: str = ""
    truncation_tail: float = 0.0

    def __post_init__(self):
        if not self.coeffs:
            raise InvalidFamilyError("a family needs at least one coefficient")
        coeffs = {}
        for k, c in sorted(self.coeffs.items()):
            if c.degree != 1 or c.domain != self.domain or c.dim != 2:
                raise ShapeError(f"coefficient {k} is not a 2x2 1-form on the family domain")
            for comp in c.comps:
                tr = np.abs(np.trace(comp, axis1=-2, axis2=-1))
                if tr.size and tr.max() > TRACE_TOL * max(1.0, np.abs(comp).max()):
                    raise InvalidFamilyError(f"coefficient {k} is not trace-free")
            coeffs[int(k)] = c
        object.__setattr__(self, "coeffs", coeffs)
        if self.higgs_type and -1 in coeffs:
            c = coeffs[-1]
            if np.abs(c.dzbar).max() > PURITY_TOL * max(1.0, np.abs(c.dz).max()):
                raise InvalidFamilyError("Higgs-type k=-1 coefficient has a dzbar component")

    @classmethod
    def from_arrays(cls, domain, arrays, **kw):
        """Build from ``{k: (dz_array, dzbar_array)}``."""
        return cls(domain, {k: GridField.one_form(domain, a, b, dim=2)
                            for k, (a, b) in arrays.items()}, **kw)

    @property
    def kmin(self):
        return min(self.coeffs)

    @property
    def kmax(self):
        return max(self.coeffs)

    def coefficient(self, k) -> GridField:
        if k in self.coeffs:
            return self.coeffs[k]
        return GridField.zeros(self.domain, 1)

    def replace(self, **kw):
        d = dict(domain=self.domain, coeffs=self.coeffs, higgs_type=self.higgs_type,
                 label=self.label, truncation_tail=self.truncation_tail)
        d.update(kw)
        return LambdaFamily(**d)

    def evaluate(self, lam):
        return evaluate(self, lam)


def evaluate(fam: LambdaFamily, lam) -> GridField:
    """The 1-form ``sum_k lam**k xi_k``."""
    lam = complex(lam)
    if lam == 0:
        if fam.kmin < 0:
            raise PoleError("family has a pole at lambda = 0")
        return fam.coefficient(0)
    out = None
    for k, c in fam.coeffs.items():
        term = lam**k * c
        out = term if out is None else out + term
    return out


def curvature(form: GridField) -> GridField:
    """``d xi + xi ^ xi`` of a single matrix-valued 1-form."""
    return exterior_derivative(form) + wedge(form, form)


def curvature_coefficients(fam: LambdaFamily) -> dict[int, GridField]:
    """Lambda-power coefficients of the curvature of ``d + xi(lambda)``."""
    out = {}
    for k in range(2 * fam.kmin, 2 * fam.kmax + 1):
        acc = exterior_derivative(fam.coeffs[k]) if k in fam.coeffs else None
        for i, a in fam.coeffs.items():
            j = k - i
            if j in fam.coeffs:
                w = wedge(a, fam.coeffs[j])
                acc = w if acc is None else acc + w
        if acc is not None:
            out[k] = acc
    return out


def flatness_residual(fam: LambdaFamily, margin=None) -> dict[int, float]:
    """Sup-norm over the grid of every lambda-power of the curvature.

    On patches the sup skips ``margin`` rows at each edge (default
    :data:`~lambdalab.grid.EDGE_MARGIN`), where the curvature involves
    composed one-sided differences of lower order.
    """
    return {k: c.sup_norm(margin) for k, c in curvature_coefficients(fam).items()}


def is_flat(fam: LambdaFamily, tol: float) -> bool:
    return max(flatness_residual(fam).values()) < tol


# ---------------------------------------------------------------------------
# gauge families

@dataclass(frozen=True)
class GaugeFamily:
    """Laurent series ``g(lambda) = sum_k lambda**k g_k`` of 2x2 matrix fields.

    ``inverse_coeffs`` may carry an exactly known inverse series; otherwise
    :meth:`inverse` computes one.
    """

    domain: Domain
    coeffs: Mapping[int, np.ndarray] = field(repr=False)
    inverse_coeffs: Mapping[int, np.ndarray] | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        def clean(d):
            out = {}
            for k, v in d.items():
                v = np.array(np.broadcast_to(np.asarray(v, complex), self.domain.shape + (2, 2)))
                v.setflags(write=False)
                out[int(k)] = v
            return dict(sorted(out.items()))
        object.__setattr__(self, "coeffs", clean(self.coeffs))
        if self.inverse_coeffs is not None:
            object.__setattr__(self, "inverse_coeffs", clean(self.inverse_coeffs))

    @classmethod
    def identity(cls, domain):
        return cls(domain, {0: np.eye(2)}, {0: np.eye(2)}, label="identity")

    @classmethod
    def constant(cls, domain, g):
        """A lambda-independent gauge (matrix or matrix field)."""
        g = np.broadcast_to(np.asarray(g, complex), domain.shape + (2, 2))
        return cls(domain, {0: g}, {0: np.linalg.inv(g)})

    @property
    def kmin(self):
        return min(self.coeffs)

    @property
    def kmax(self):
        return max(self.coeffs)

    def evaluate(self, lam):
        lam = complex(lam)
        return sum(lam**k * c for k, c in self.coeffs.items())

    def compose(self, other: "GaugeFamily", order=None) -> "GaugeFamily":
        """Pointwise product ``self(lambda) @ other(lambda)``."""
        inv = None
        if self.inverse_coeffs is not None and other.inverse_coeffs is not None:
            inv = _conv(other.inverse_coeffs, self.inverse_coeffs, order)
        return GaugeFamily(self.domain, _conv(self.coeffs, other.coeffs, order), inv)

    def check_invertible(self, tol=1e-8, samples=8):
        """Raise :class:`SingularGaugeError` naming the first degenerate grid point."""
        if self.kmin >= 0:  # a power series is invertible iff its constant term is
            lams = [0.0]
        else:
            lams = list(np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples))
        for lam in lams:
            det = np.abs(np.linalg.det(self.evaluate(lam)))
            if det.min() <= tol:
                idx = np.unravel_index(np.argmin(det), det.shape)
                raise SingularGaugeError(
                    f"gauge is singular at grid point {tuple(map(int, idx))} "
                    f"(lambda={lam:.3g}, |det|={det[idx]:.2e})")

    def inverse(self, order=DEFAULT_ORDER) -> "GaugeFamily":
        if self.inverse_coeffs is not None:
            return GaugeFamily(self.domain, self.inverse_coeffs, self.coeffs)
        if self.kmin >= 0:
            inv = _series_inverse(self.coeffs, order)
        else:
            inv = _interpolated_inverse(self, order)
        return GaugeFamily(self.domain, inv, self.coeffs)


def _series_inverse(coeffs, order):
    """Inverse of a power series with invertible constant term (Neumann recursion)."""
    g0inv = np.linalg.inv(coeffs[0]) if 0 in coeffs else None
    if g0inv is None:
        raise SingularGaugeError("power-series gauge without constant term")
    inv = {0: g0inv}
    for n in range(1, order + 1):
        acc = 0
        for k in range(1, n + 1):
            if k in coeffs:
                acc = acc + matmul(coeffs[k], inv[n - k])
        inv[n] = -matmul(g0inv, acc) if not np.isscalar(acc) else np.zeros_like(g0inv)
    return inv


def _interpolated_inverse(g: GaugeFamily, order):
    """Invert pointwise on roots of unity and re-interpolate by DFT in lambda.

    Coefficients are recovered for powers in ``[-order, order]``; anything
    beyond that window aliases into the retained range.
    """
    m = 2 * order + 1
    lams = np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.stack([np.linalg.inv(g.evaluate(l)) for l in lams])
    # samples are sum_k c_k exp(2 pi i k n / m), so the forward DFT puts c_k at index k mod m
    spec = np.fft.fft(vals, axis=0) / m
    out = {}
    for k in range(-order, order + 1):
        c = spec[k % m]
        if np.abs(c).max() > 1e-14:
            out[k] = c
    return out


def gauge_apply(fam: LambdaFamily, g: GaugeFamily, order=None,
                inverse: GaugeFamily | None = None) -> LambdaFamily:
    """``xi -> g^{-1} xi g + g^{-1} dg`` expanded in powers of lambda.

    Coefficients above ``order`` (default: the exact top power, capped at
    :data:`DEFAULT_ORDER`) are dropped; the largest sup-norm of a dropped
    coefficient is recorded as ``truncation_tail``.
    """
    if g.domain != fam.domain:
        raise ShapeError("gauge and family live on different domains")
    g.check_invertible()
    if inverse is None and g.inverse_coeffs is not None:
        inverse = g.inverse()
    if order is None:
        if inverse is not None:
            exact_top = fam.kmax + inverse.kmax + g.kmax
            order = min(exact_top, max(DEFAULT_ORDER, fam.kmax))
        else:
            order = max(DEFAULT_ORDER, fam.kmax)
    if inverse is None:
        # coefficient k of the result uses g^{-1}_i with i <= k - kmin(xi) - kmin(g)
        inverse = g.inverse(order - min(fam.kmin, 0) - g.kmin)
    ginv = inverse.coeffs
    keep = order + 1  # the first dropped power feeds the tail estimate
    dom = fam.domain
    # only g_l with l <= keep - kmin(g^{-1}) - kmin(xi) can reach a kept power
    gtop = keep - min(ginv) - min(fam.kmin, 0)
    gco = {k: c for k, c in g.coeffs.items() if k <= gtop}
    dg = {}
    for k, c in gco.items():
        d = derive(GridField.zero_form(dom, c))
        dg[k] = (d.dz, d.dzbar)
    out = {}
    for slot in (0, 1):
        xi = {k: c.comps[slot] for k, c in fam.coeffs.items()}
        conj = _product([ginv, xi, gco], keep)
        mc = _product([ginv, {k: v[slot] for k, v in dg.items()}], keep)
        for k, v in mc.items():
            conj[k] = conj[k] + v if k in conj else v
        out[slot] = conj
    keys = sorted(set(out[0]) | set(out[1]))
    zero = np.zeros(dom.shape + (2, 2), complex)
    kept, tail = {}, fam.truncation_tail
    for k in keys:
        a, b = out[0].get(k, zero), out[1].get(k, zero)
        if k > order:
            tail = max(tail, float(np.abs(a).max()), float(np.abs(b).max()))
            continue
        kept[k] = GridField(dom, 1, (a, b))
    return LambdaFamily(dom, kept, higgs_type=False, label=fam.label,
                        truncation_tail=tail)


# ---------------------------------------------------------------------------
# involutions and reparametrisations

Involution = Literal["tau", "rho", "N"]


def sigma_map(sigma: Involution, lam):
    """The induced map on the lambda-sphere."""
    lam = complex(lam)
    return {"tau": -1 / np.conj(lam), "rho": 1 / np.conj(lam), "N": -lam}[sigma]


def sigma_pullback(fam: LambdaFamily, sigma: Involution) -> LambdaFamily:
    """Coefficients of the pulled-back family.

    For the antiholomorphic involutions the result satisfies
    ``(sigma* xi)(lam) = -conj(xi(sigma~(lam)))^T``; for ``N`` it is
    ``xi(-lam)``.
    """
    coeffs = {}
    for k, c in fam.coeffs.items():
        if sigma == "N":
            coeffs[k] = (-1) ** k * c
        elif sigma == "tau":
            coeffs[-k] = -((-1) ** k) * c.conj_transpose()
        elif sigma == "rho":
            coeffs[-k] = -1 * c.conj_transpose()
        else:
            raise ValueError(f"unknown involution {sigma!r}")
    higgs = fam.higgs_type and (sigma == "N" or -1 not in coeffs or
                               np.abs(coeffs[-1].dzbar).max() == 0)
    return fam.replace(coeffs=coeffs, higgs_type=higgs)


def substitute_lambda_squared(fam: LambdaFamily) -> LambdaFamily:
    """The family ``xi(lambda**2)``."""
    return fam.replace(coeffs={2 * k: c for k, c in fam.coeffs.items()}, higgs_type=False)


def families_close(a: LambdaFamily, b: LambdaFamily) -> float:
    """Largest coefficient-wise sup-norm difference."""
    keys = set(a.coeffs) | set(b.coeffs)
    return max((a.coefficient(k) - b.coefficient(k)).sup_norm() for k in keys)


def det_winding(g: GaugeFamily, samples=256, point=(0, 0), n_check=8, seed=0,
                tol=1e-8) -> int:
    """Winding number of ``lambda -> det g(lambda)(p)`` along the unit circle."""
    lams = np.exp(2j * np.pi * np.arange(samples) / samples)
    dets = np.stack([np.linalg.det(g.evaluate(l)) for l in lams])  # (samples, nx, ny)
    if np.abs(dets).min() < tol:
        raise IndeterminateWindingError("det g vanishes (numerically) on |lambda| = 1")

    def wind(series):
        steps = np.angle(np.roll(series, -1) / series)
        return int(round(steps.sum() / (2 * np.pi)))

    w = wind(dets[:, point[0], point[1]])
    rng = np.random.default_rng(seed)
    nx, ny = g.domain.shape
    for i, j in zip(rng.integers(0, nx, n_check), rng.integers(0, ny, n_check)):
        if wind(dets[:, i, j]) != w:
            raise IndeterminateWindingError("winding number varies over the grid")
    return w


def sl2_exp(B):
    """Pointwise matrix exponential of trace-free 2x2 fields.

    Uses ``exp(B) = cosh(s) I + sinh(s)/s B`` with ``s**2 = -det B``.
    """
    B = np.asarray(B, complex)
    s = np.sqrt(-np.linalg.det(B))
    small = np.abs(s) < 1e-8
    s_safe = np.where(small, 1.0, s)
    sinhc = np.where(small, 1.0 + s**2 / 6, np.sinh(s_safe) / s_safe)
    return np.cosh(s)[..., None, None] * np.eye(2) + sinhc[..., None, None] * B


def parity(g: GaugeFamily) -> int:
    return det_winding(g) % 2
