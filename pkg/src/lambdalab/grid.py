"""Discrete complex-analytic calculus on flat tori and rectangular patches.

Conventions (fixed for the whole package):

* ``z = x + i y``, ``d/dz = (d/dx - i d/dy)/2``, ``d/dzbar = (d/dx + i d/dy)/2``;
* a 1-form is stored by its ``(dz, dzbar)`` components, a 2-form by its
  coefficient of ``dz ^ dzbar``;
* ``dz ^ dzbar = -2i dx ^ dy`` (:data:`DZ_DZBAR`), used by every integral.

A torus is ``C / (Z + modulus Z)`` sampled uniformly in lattice coordinates
``(s, t) in [0, 1)^2`` with ``z = s + modulus * t``.  Derivatives on the torus
are spectral; on a patch they are 4th-order finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

DZ_DZBAR = -2j
MIN_RESOLUTION = 8
# Composing two finite-difference derivatives loses an order within a few
# rows of a patch edge; pointwise residuals on patches skip this many rows.
EDGE_MARGIN = 6


class ConfigurationError(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    kind: Literal["torus", "patch"]
    shape: tuple[int, int]
    modulus: complex = 1j
    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("torus", "patch"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        nx, ny = self.shape
        if min(nx, ny) < MIN_RESOLUTION or nx % 2 or ny % 2:
            raise ConfigurationError(
                f"resolution {self.shape} must be even and >= {MIN_RESOLUTION}")
        if self.kind == "torus" and complex(self.modulus).imag <= 0:
            raise ConfigurationError("torus modulus needs Im(modulus) > 0")
        if self.kind == "patch":
            if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0]:
                raise ConfigurationError("empty patch extents")
        object.__setattr__(self, "shape", (int(nx), int(ny)))
        object.__setattr__(self, "modulus", complex(self.modulus))

    @classmethod
    def torus(cls, n=64, modulus=1j):
        nx, ny = (n, n) if np.isscalar(n) else n
        return cls("torus", (nx, ny), modulus=modulus)

    @classmethod
    def patch(cls, x_range, y_range, shape):
        return cls("patch", tuple(shape), x_range=tuple(map(float, x_range)),
                   y_range=tuple(map(float, y_range)))

    @property
    def is_torus(self):
        return self.kind == "torus"

    @property
    def spacing(self):
        """Grid steps in the two grid directions (lattice units on a torus)."""
        nx, ny = self.shape
        if self.is_torus:
            return 1.0 / nx, 1.0 / ny
        return ((self.x_range[1] - self.x_range[0]) / (nx - 1),
                (self.y_range[1] - self.y_range[0]) / (ny - 1))

    def lattice(self):
        """Grid coordinates along the two grid directions, ``indexing='ij'``."""
        nx, ny = self.shape
        if self.is_torus:
            s, t = np.arange(nx) / nx, np.arange(ny) / ny
        else:
            s = np.linspace(*self.x_range, nx)
            t = np.linspace(*self.y_range, ny)
        return np.meshgrid(s, t, indexing="ij")

    @property
    def z(self):
        s, t = self.lattice()
        if self.is_torus:
            return s + self.modulus * t
        return s + 1j * t

    @property
    def edge_vectors(self):
        """Complex displacement per unit of the two grid parameters."""
        if self.is_torus:
            return 1.0 + 0j, self.modulus
        return 1.0 + 0j, 1j

    def quadrature_weights(self):
        """Weights w with sum(w * f) ~ integral of f dx dy."""
        nx, ny = self.shape
        if self.is_torus:
            return np.full(self.shape, self.modulus.imag / (nx * ny))
        hx, hy = self.spacing
        wx = np.full(nx, hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(ny, hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def interior(self, margin=None):
        """Index pair selecting points away from patch edges (everything on a torus)."""
        if self.is_torus:
            return (slice(None), slice(None))
        m = EDGE_MARGIN if margin is None else int(margin)
        if m == 0:
            return (slice(None), slice(None))
        return (slice(m, -m), slice(m, -m))

    @property
    def area(self):
        if self.is_torus:
            return self.modulus.imag
        return (self.x_range[1] - self.x_range[0]) * (self.y_range[1] - self.y_range[0])

    def to_dict(self):
        return {"kind": self.kind, "shape": list(self.shape),
                "modulus": [self.modulus.real, self.modulus.imag],
                "x_range": list(self.x_range), "y_range": list(self.y_range)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["shape"]), modulus=complex(*d["modulus"]),
                   x_range=tuple(d["x_range"]), y_range=tuple(d["y_range"]))


def _freeze(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridField:
    """Matrix-valued 0-, 1- or 2-form sampled on a domain.

    ``comps`` holds one array of shape ``(nx, ny, d, d)`` for 0- and 2-forms
    and two such arrays (``dz`` then ``dzbar``) for 1-forms.
    """

    domain: Domain
    degree: int
    comps: tuple = field(repr=False)

    def __post_init__(self):
        n_expected = 2 if self.degree == 1 else 1
        if self.degree not in (0, 1, 2) or len(self.comps) != n_expected:
            raise ShapeError(f"a {self.degree}-form needs {n_expected} component arrays")
        comps = tuple(_freeze(c) for c in self.comps)
        shapes = {c.shape for c in comps}
        if len(shapes) != 1:
            raise ShapeError("components disagree in shape")
        shp = comps[0].shape
        if shp[:2] != self.domain.shape or len(shp) != 4 or shp[2] != shp[3]:
            raise ShapeError(f"component shape {shp} does not fit domain {self.domain.shape}")
        object.__setattr__(self, "comps", comps)

    # constructors -------------------------------------------------------
    @classmethod
    def zero_form(cls, domain, values):
        return cls(domain, 0, (_as_matrix_field(domain, values),))

    @classmethod
    def one_form(cls, domain, dz=0.0, dzbar=0.0, dim=None):
        a, b = _broadcast_pair(domain, dz, dzbar, dim)
        return cls(domain, 1, (a, b))

    @classmethod
    def two_form(cls, domain, values):
        return cls(domain, 2, (_as_matrix_field(domain, values),))

    @classmethod
    def zeros(cls, domain, degree, dim=2):
        z = np.zeros(domain.shape + (dim, dim), complex)
        return cls(domain, degree, (z, z) if degree == 1 else (z,))

    # accessors -----------------------------------------------------------
    @property
    def dim(self):
        return self.comps[0].shape[-1]

    @property
    def values(self):
        if self.degree == 1:
            raise ShapeError("a 1-form has two components; use .dz / .dzbar")
        return self.comps[0]

    @property
    def dz(self):
        self._need(1)
        return self.comps[0]

    @property
    def dzbar(self):
        self._need(1)
        return self.comps[1]

    def _need(self, degree):
        if self.degree != degree:
            raise ShapeError(f"expected a {degree}-form, got a {self.degree}-form")

    def _check_compatible(self, other):
        if not isinstance(other, GridField):
            raise ShapeError("expected a GridField")
        if other.domain != self.domain or other.dim != self.dim:
            raise ShapeError("domain or matrix dimension mismatch")

    # algebra -------------------------------------------------------------
    def _map(self, fn):
        return GridField(self.domain, self.degree, tuple(fn(c) for c in self.comps))

    def __add__(self, other):
        self._check_compatible(other)
        if other.degree != self.degree:
            raise ShapeError("cannot add forms of different degree")
        return GridField(self.domain, self.degree,
                         tuple(a + b for a, b in zip(self.comps, other.comps)))

    def __sub__(self, other):
        return self + (-1) * other

    def __neg__(self):
        return (-1) * self

    def __mul__(self, c):
        if isinstance(c, GridField):
            raise ShapeError("use wedge()/matmul for products of fields")
        c = np.asarray(c)
        if c.ndim == 2:  # pointwise scalar function on the grid
            c = c[..., None, None]
        return self._map(lambda a: a * c)

    __rmul__ = __mul__

    def left(self, g):
        """Pointwise ``g @ self`` for a 0-form or constant matrix g."""
        g = g.values if isinstance(g, GridField) else np.asarray(g)
        return self._map(lambda a: matmul(g, a))

    def right(self, g):
        """Pointwise ``self @ g``."""
        g = g.values if isinstance(g, GridField) else np.asarray(g)
        return self._map(lambda a: matmul(a, g))

    def conj_transpose(self):
        """Pointwise adjoint; swaps the (1,0) and (0,1) slots of a 1-form."""
        h = lambda a: np.conj(np.swapaxes(a, -1, -2))  # noqa: E731
        if self.degree == 1:
            return GridField(self.domain, 1, (h(self.dzbar), h(self.dz)))
        if self.degree == 2:  # conj(dz^dzbar) = -dz^dzbar
            return GridField(self.domain, 2, (-h(self.values),))
        return self._map(h)

    def part(self, which):
        """(1,0) or (0,1) part of a 1-form."""
        self._need(1)
        z = np.zeros_like(self.dz)
        if which == "10":
            return GridField(self.domain, 1, (self.dz, z))
        if which == "01":
            return GridField(self.domain, 1, (z, self.dzbar))
        raise ValueError(which)

    def trace(self):
        return self._map(lambda a: np.trace(a, axis1=-2, axis2=-1)[..., None, None])

    def sup_norm(self, margin=0):
        """Largest entry modulus; ``margin`` rows are skipped at patch edges."""
        idx = self.domain.interior(margin)
        return max(float(np.max(np.abs(c[idx]))) if c.size else 0.0 for c in self.comps)

    def along(self, edge):
        """Evaluate a 1-form on the grid-direction vector ``edge`` (complex)."""
        self._need(1)
        return self.dz * edge + self.dzbar * np.conj(edge)


def matmul(a, b):
    """Pointwise matrix product; spelled out for 2x2 blocks, where it is much
    faster than batched ``@`` on small matrices."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-2:] != (2, 2) or b.shape[-2:] != (2, 2):
        return a @ b
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), np.result_type(a, b))
    b00, b01, b10, b11 = b[..., 0, 0], b[..., 0, 1], b[..., 1, 0], b[..., 1, 1]
    for i in (0, 1):
        out[..., i, 0] = a[..., i, 0] * b00 + a[..., i, 1] * b10
        out[..., i, 1] = a[..., i, 0] * b01 + a[..., i, 1] * b11
    return out


def _as_matrix_field(domain, values):
    v = np.asarray(values, dtype=complex)
    if v.ndim == 0:
        v = np.full(domain.shape + (1, 1), v)
    elif v.shape == domain.shape:
        v = v[..., None, None]
    elif v.ndim == 2:  # constant matrix
        v = np.broadcast_to(v, domain.shape + v.shape)
    return v


def _broadcast_pair(domain, a, b, dim):
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if dim is None:
        dims = [c.shape[-1] for c in (a, b) if c.ndim >= 2 and c.shape != domain.shape]
        dim = dims[0] if dims else 1
    out = []
    for c in (a, b):
        if c.ndim == 0:  # scalar multiple of the identity
            c = c * np.eye(dim)
        out.append(np.broadcast_to(_as_matrix_field(domain, c), domain.shape + (dim, dim)))
    return out


# ---------------------------------------------------------------------------
# differentiation

def _spectral_diff(values, axis):
    n = values.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0  # drop the Nyquist mode for odd derivatives
    shape = [1] * values.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(values, axis=axis) * k.reshape(shape), axis=axis)


_D1_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
# one order higher at the edges so that composed derivatives stay 4th order
_D1_EDGE = np.array([[-137.0, 300.0, -300.0, 200.0, -75.0, 12.0],
                     [-12.0, -65.0, 120.0, -60.0, 20.0, -3.0]]) / 60.0


def _fd_diff(values, axis, h):
    """4th-order centred differences with one-sided closures at both ends."""
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    out = np.empty_like(v)
    c = _D1_INTERIOR
    out[2:-2] = (c[0] * v[:-4] + c[1] * v[1:-3] + c[3] * v[3:-1] + c[4] * v[4:])
    for i, row in enumerate(_D1_EDGE):
        out[i] = np.tensordot(row, v[:6], axes=1)
        out[n - 1 - i] = -np.tensordot(row, v[::-1][:6], axes=1)
    return np.moveaxis(out / h, 0, axis)


def grid_partials(domain, values):
    """Derivatives of sampled values along the two grid parameters."""
    if domain.is_torus:
        return _spectral_diff(values, 0), _spectral_diff(values, 1)
    hx, hy = domain.spacing
    return _fd_diff(values, 0, hx), _fd_diff(values, 1, hy)


def dz_dzbar(domain, values):
    """(d/dz, d/dzbar) of a raw array sampled on ``domain``."""
    fs, ft = grid_partials(domain, values)
    e1, e2 = domain.edge_vectors
    # f_s = e1 f_z + conj(e1) f_zbar,  f_t = e2 f_z + conj(e2) f_zbar
    det = e1 * np.conj(e2) - np.conj(e1) * e2
    fz = (np.conj(e2) * fs - np.conj(e1) * ft) / det
    fzb = (e1 * ft - e2 * fs) / det
    return fz, fzb


def derive(f: GridField) -> GridField:
    """Exterior derivative of a 0-form, returned as the 1-form ``df``."""
    f._need(0)
    fz, fzb = dz_dzbar(f.domain, f.values)
    return GridField(f.domain, 1, (fz, fzb))


def exterior_derivative(a: GridField) -> GridField:
    """d of a 0-form (1-form result) or of a 1-form (2-form result)."""
    if a.degree == 0:
        return derive(a)
    a._need(1)
    bz, _ = dz_dzbar(a.domain, a.dzbar)
    _, azb = dz_dzbar(a.domain, a.dz)
    return GridField(a.domain, 2, (bz - azb,))


def wedge(a: GridField, b: GridField) -> GridField:
    """Pointwise ``a ^ b`` with matrix multiplication: (a_z b_zbar - a_zbar b_z) dz^dzbar."""
    a._need(1)
    b._need(1)
    a._check_compatible(b)
    return GridField(a.domain, 2, (matmul(a.dz, b.dzbar) - matmul(a.dzbar, b.dz),))


def integrate(w: GridField, reduce: Literal["trace", "entry"] = "trace"):
    """Integral of a 2-form over the domain, with dz^dzbar = -2i dx^dy.

    ``reduce="trace"`` returns a complex number; ``"entry"`` returns the
    matrix of integrals (a complex number for scalar forms).
    """
    if not isinstance(w, GridField) or w.degree != 2:
        raise ShapeError("integrate expects a 2-form")
    wts = w.domain.quadrature_weights()
    m = DZ_DZBAR * np.einsum("ij,ijab->ab", wts, w.values)
    if reduce == "trace":
        return complex(np.trace(m))
    if reduce == "entry":
        return complex(m[0, 0]) if m.shape == (1, 1) else m
    raise ValueError(reduce)


def density(w: GridField) -> np.ndarray:
    """Trace of a 2-form as a density against dx dy."""
    w._need(2)
    return DZ_DZBAR * np.trace(w.values, axis1=-2, axis2=-1)


def integrate_density(domain, dens) -> complex:
    return complex(np.sum(domain.quadrature_weights() * dens))
