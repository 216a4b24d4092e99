"""Kernel-line splittings, twisting, the dual-surface gauge and line degrees.

Both the twist and the dual surface gauge by ``h(lambda) = diag(lambda^{-1}, 1)``
with respect to ``E = L + L'``, where L is the kernel line of the nilpotent
Higgs field: ``h = lambda^{-1} p_L + (1 - p_L)``.  Using ``diag(1, lambda)``
instead changes h by a central scalar and gives the same gauge action.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import (GaugeFamily, LambdaFamily, curvature, gauge_apply,
                       substitute_lambda_squared)
from .grid import (Domain, GridField, ShapeError, derive, integrate, matmul, wedge)

TWIST_TOL = 1e-10


class ZeroLocusError(ValueError):
    pass


class NotNilpotentError(ValueError):
    pass


class NotTwistableError(ValueError):
    pass


class UnsupportedDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LineSplitting:
    domain: Domain
    p: np.ndarray
    provenance: str = "supplied"

    def __post_init__(self):
        p = np.array(np.broadcast_to(np.asarray(self.p, complex), self.domain.shape + (2, 2)))
        if np.abs(matmul(p, p) - p).max() > 1e-12 * max(1.0, np.abs(p).max() ** 2):
            raise ValueError("p_L is not a projector")
        if np.abs(np.trace(p, axis1=-2, axis2=-1) - 1).max() > 1e-12:
            raise ValueError("p_L must have rank one")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def p_perp(self):
        return np.eye(2) - self.p

    def swapped(self):
        """The splitting with the roles of L and its complement exchanged."""
        return LineSplitting(self.domain, self.p_perp, provenance="swapped")

    def conjugated(self, g):
        """Splitting of the gauge-transformed bundle: ``g^{-1} p g``."""
        g = np.broadcast_to(np.asarray(g, complex), self.domain.shape + (2, 2))
        return LineSplitting(self.domain, matmul(np.linalg.inv(g), matmul(self.p, g)),
                             provenance=self.provenance)

    def gauge(self) -> GaugeFamily:
        """``h(lambda) = lambda^{-1} p + (1 - p)`` together with its exact inverse."""
        p, q = self.p, self.p_perp
        return GaugeFamily(self.domain, {-1: p, 0: q}, {0: q, 1: p}, label="diag(1/lambda, 1)")


def kernel_splitting(phi: GridField, tol=1e-10, zero_tol=1e-12) -> LineSplitting:
    """Orthogonal splitting ``L + L^perp`` with L the kernel of a nilpotent (1,0)-form."""
    phi._need(1)
    A = phi.dz
    scale = np.abs(A).max(axis=(-1, -2))
    if np.abs(phi.dzbar).max() > tol * max(1.0, scale.max()):
        raise ShapeError("Higgs field must be of type (1,0)")
    if scale.min() <= zero_tol:
        idx = np.unravel_index(np.argmin(scale), scale.shape)
        raise ZeroLocusError(f"Higgs field vanishes at grid point {tuple(map(int, idx))}")
    if (np.abs(matmul(A, A)).max(axis=(-1, -2)) / scale**2).max() > tol:
        raise NotNilpotentError("Higgs field is not nilpotent")
    # kernel of [[a, b], [c, d]] is spanned by (b, -a) or (d, -c)
    v1 = np.stack([A[..., 0, 1], -A[..., 0, 0]], -1)
    v2 = np.stack([A[..., 1, 1], -A[..., 1, 0]], -1)
    use1 = (np.linalg.norm(v1, axis=-1) >= np.linalg.norm(v2, axis=-1))[..., None]
    v = np.where(use1, v1, v2)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    p = v[..., :, None] * np.conj(v[..., None, :])
    if np.abs(matmul(A, p)).max() > tol * max(1.0, scale.max()):
        raise NotNilpotentError("kernel projector does not annihilate Phi")
    split = LineSplitting(phi.domain, p, provenance="kernel-of-Higgs")
    _check_smooth(phi, split)
    return split


def _check_smooth(phi, split):
    """The kernel line should vary no faster than Phi does (relative to |Phi|)."""
    dp = derive(GridField.zero_form(phi.domain, split.p)).sup_norm(margin=0)
    a = GridField.zero_form(phi.domain, phi.dz)
    da = derive(a).sup_norm(margin=0)
    amin = np.abs(phi.dz).max(axis=(-1, -2)).min()
    if dp > 10 * da / amin + 1e-8:
        raise ValueError("kernel splitting is not resolved by the grid")


def _check_kernel(fam, split):
    phi = fam.coefficient(-1)
    if np.abs(matmul(phi.dz, split.p)).max() > 1e-10 * max(1.0, phi.sup_norm()):
        raise ValueError("splitting is not the kernel line of the lambda^-1 coefficient")


def _drop_negative_tail(fam: LambdaFamily, what) -> LambdaFamily:
    """Remove k < -1 coefficients, which must vanish for the section to extend to 0."""
    coeffs = dict(fam.coeffs)
    for k in [k for k in coeffs if k < -1]:
        c = coeffs.pop(k)
        if c.sup_norm(margin=0) > TWIST_TOL * max(1.0, fam.coefficient(-1).sup_norm()):
            raise NotTwistableError(
                f"{what}: lambda^{k} coefficient {c.sup_norm():.2e} does not vanish")
    c = coeffs.get(-1)
    higgs = c is None or np.abs(c.dzbar).max() <= 1e-12 * max(1.0, np.abs(c.dz).max())
    return fam.replace(coeffs=coeffs, higgs_type=higgs)


def twist(fam: LambdaFamily, split: LineSplitting | None) -> LambdaFamily:
    """Substitute ``lambda -> lambda^2`` and gauge by ``h`` along the kernel splitting."""
    if fam.coefficient(-1).sup_norm(margin=0) == 0:
        return substitute_lambda_squared(fam).replace(label=f"twist({fam.label})")
    _check_kernel(fam, split)
    out = gauge_apply(substitute_lambda_squared(fam), split.gauge())
    return _drop_negative_tail(out, "twist").replace(label=f"twist({fam.label})")


def dual_surface(fam: LambdaFamily, split: LineSplitting) -> LambdaFamily:
    """Gauge by ``h`` along the kernel splitting, without substituting lambda^2."""
    _check_kernel(fam, split)
    out = gauge_apply(fam, split.gauge())
    return _drop_negative_tail(out, "dual surface").replace(label=f"dual({fam.label})")


def line_curvature(fam: LambdaFamily, split: LineSplitting) -> GridField:
    """Curvature 2-form of the connection ``p (d + xi_0) p`` induced on L.

    ``F^L = p F p + p Dp ^ Dp p`` with ``Dp = dp + [xi_0, p]`` and F the
    curvature of ``d + xi_0``.
    """
    dom = fam.domain
    xi0 = fam.coefficient(0)
    p = split.p
    dp = derive(GridField.zero_form(dom, p))
    Dp = dp + xi0.right(p) - xi0.left(p)
    F = curvature(xi0)
    return F.left(p).right(p) + wedge(Dp, Dp).left(p).right(p)


def line_curvature_integral(fam: LambdaFamily, split: LineSplitting) -> float:
    """``(i / 2 pi) int tr F^L`` over the domain (a Chern-Weil degree on a torus,
    a boundary-sensitive number on a patch)."""
    val = 1j / (2 * np.pi) * integrate(line_curvature(fam, split))
    return float(val.real)


def line_degree(fam: LambdaFamily, split: LineSplitting) -> float:
    """Degree of the kernel line bundle via Chern-Weil; closed surfaces only."""
    if not fam.domain.is_torus:
        raise UnsupportedDomainError("a line-bundle degree needs a closed surface (torus)")
    return line_curvature_integral(fam, split)


def twist_block_identity(twisted: LambdaFamily, split: LineSplitting) -> float:
    """Pointwise sup of ``F^{nabla^L} + phi ^ psi + alpha ^ beta`` on the L-block.

    ``phi``/``beta`` are the off-diagonal blocks of the lambda^{-1} coefficient
    of the twisted family, ``alpha``/``psi`` those of its lambda^1 coefficient.
    """
    p, q = split.p, split.p_perp
    m1, p1 = twisted.coefficient(-1), twisted.coefficient(1)
    phi, beta = m1.left(p).right(q), m1.left(q).right(p)
    alpha, psi = p1.left(p).right(q), p1.left(q).right(p)
    total = (line_curvature(twisted, split) + wedge(phi, psi) + wedge(alpha, beta))
    return total.left(p).right(p).sup_norm(margin=None)
