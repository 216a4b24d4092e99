"""Parallel frames, holonomy fingerprints and the lightcone model of R^{4,1}.

``V`` is the space of hermitian 2x2 matrices plus a real line, with quadratic
form ``q(A, r) = -det A + r^2``; :func:`isometry_psi` identifies it with
``R^{4,1}``.  Frames solve ``dF = -xi(lambda0) F`` with ``F(base) = Id``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .builders import SolutionData
from .families import LambdaFamily, evaluate, sigma_map
from .grid import Domain, GridField, dz_dzbar, matmul, wedge

ETA = np.diag([-1.0, 1.0, 1.0, 1.0, 1.0])


class FlatnessViolationError(RuntimeError):
    pass


class IllConditionedError(RuntimeError):
    pass


class DegenerateSurfaceError(RuntimeError):
    pass


class RankError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# transport

def _midpoints(values, axis, periodic):
    """Values halfway between consecutive samples along ``axis``.

    Trigonometric interpolation on periodic axes, cubic Lagrange otherwise.
    Entry i is the value between samples i and i+1.
    """
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    if periodic:
        k = np.fft.fftfreq(n, d=1.0 / n)
        shift = np.exp(1j * np.pi * k / n)
        if n % 2 == 0:
            shift[n // 2] = np.cos(np.pi / 2)  # symmetric treatment of Nyquist
        shift = shift.reshape((n,) + (1,) * (v.ndim - 1))
        mid = np.fft.ifft(np.fft.fft(v, axis=0) * shift, axis=0)
        return np.moveaxis(mid, 0, axis)
    mid = np.empty((n - 1,) + v.shape[1:], complex)
    mid[1:-1] = (-v[:-3] + 9 * v[1:-2] + 9 * v[2:-1] - v[3:]) / 16
    mid[0] = (5 * v[0] + 15 * v[1] - 5 * v[2] + v[3]) / 16
    mid[-1] = (5 * v[-1] + 15 * v[-2] - 5 * v[-3] + v[-4]) / 16
    return np.moveaxis(mid, 0, axis)


def _rk4_step(F, M0, Mh, M1, h):
    k1 = -matmul(M0, F)
    k2 = -matmul(Mh, F + 0.5 * h * k1)
    k3 = -matmul(Mh, F + 0.5 * h * k2)
    k4 = -matmul(M1, F + h * k3)
    return F + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _transport_line(M, mid, start, F0, h):
    """Transport along axis 0 of ``M`` from index ``start`` in both directions."""
    n = M.shape[0]
    out = np.empty(M.shape[:1] + np.broadcast_shapes(F0.shape, M.shape[1:]), complex)
    out[start] = F0
    for i in range(start, n - 1):
        out[i + 1] = _rk4_step(out[i], M[i], mid[i], M[i + 1], h)
    for i in range(start, 0, -1):
        out[i - 1] = _rk4_step(out[i], M[i], mid[i - 1], M[i - 1], -h)
    return out


def _generators(form: GridField):
    """``xi(d/ds)``, ``xi(d/dt)`` along the two grid parameters."""
    e1, e2 = form.domain.edge_vectors
    return form.along(e1), form.along(e2)


@dataclass(frozen=True)
class FrameField:
    domain: Domain
    lam: complex
    F: np.ndarray = field(repr=False)
    base: tuple
    path_residual: float

    @property
    def det_defect(self):
        return float(np.abs(np.linalg.det(self.F) - 1).max())


def _frame_paths(form, base):
    dom = form.domain
    Ms, Mt = _generators(form)
    hs, ht = dom.spacing
    periodic = dom.is_torus
    mids_s = _midpoints(Ms, 0, periodic)
    mids_t = _midpoints(Mt, 1, periodic)
    if periodic:  # transport stays inside one fundamental domain
        mids_s, mids_t = mids_s[:-1], mids_t[:, :-1]
    i0, j0 = base
    eye = np.eye(2, dtype=complex)
    # rows first: along s at t = t0, then every column along t
    row = _transport_line(Ms[:, j0], mids_s[:, j0], i0, eye, hs)
    A = _transport_line(np.swapaxes(Mt, 0, 1), np.swapaxes(mids_t, 0, 1), j0, row, ht)
    A = np.swapaxes(A, 0, 1)
    # columns first
    col = _transport_line(Mt[i0], mids_t[i0], j0, eye, ht)
    B = _transport_line(Ms, mids_s, i0, col, hs)
    return A, B


def integrate_frame(fam: LambdaFamily, lam0, base=(0, 0), max_residual=1e-5) -> FrameField:
    """Parallel frame of ``d + xi(lam0)`` normalised to the identity at ``base``."""
    if complex(lam0) == 0:
        raise ValueError("lambda0 must be nonzero")
    form = evaluate(fam, lam0)
    A, B = _frame_paths(form, base)
    resid = float(np.abs(A - B).max())
    if resid > max_residual:
        raise FlatnessViolationError(
            f"transport depends on the path (mismatch {resid:.2e}); family is not flat")
    return FrameField(fam.domain, complex(lam0), A, tuple(base), resid)


def frame_reality_defect(fam: LambdaFamily, lam0, base=(0, 0)) -> float:
    """``sup |F(lam)^{-1} - conj(F(-1/conj(lam)))^T|`` for tau-real families."""
    F = integrate_frame(fam, lam0, base).F
    G = integrate_frame(fam, sigma_map("tau", lam0), base).F
    return float(np.abs(np.linalg.inv(F) - np.conj(np.swapaxes(G, -1, -2))).max())


def holonomy(fam: LambdaFamily, lam0, loop="x", base=(0, 0)) -> np.ndarray:
    """Transport once around a lattice cycle of the torus through ``base``."""
    dom = fam.domain
    if not dom.is_torus:
        raise ValueError("holonomy needs a torus domain")
    Ms, Mt = _generators(evaluate(fam, lam0))
    i0, j0 = base
    if loop == "x":
        M, mid, h, n = Ms[:, j0], _midpoints(Ms, 0, True)[:, j0], dom.spacing[0], dom.shape[0]
    elif loop == "y":
        M, mid, h, n = Mt[i0], _midpoints(Mt, 1, True)[i0], dom.spacing[1], dom.shape[1]
    else:
        raise ValueError(loop)
    start = i0 if loop == "x" else j0
    F = np.eye(2, dtype=complex)
    for step in range(n):
        i = (start + step) % n
        F = _rk4_step(F, M[i], mid[i], M[(i + 1) % n], h)
    return F


def fingerprint(fam: LambdaFamily, lams, loops=("x", "y")) -> np.ndarray:
    """Holonomy traces, shape ``(len(lams), len(loops))``."""
    return np.array([[np.trace(holonomy(fam, l, c)) for c in loops] for l in lams])


def fingerprint_defect(fam: LambdaFamily, sigma, lams) -> float:
    """Largest violation of the reality pattern of ``sigma`` on holonomy traces.

    tau/rho: ``tr Hol(lam) = conj(tr Hol(sigma~ lam))``; N: ``tr Hol(lam) = tr Hol(-lam)``.
    """
    a = fingerprint(fam, lams)
    b = fingerprint(fam, [sigma_map(sigma, l) for l in lams])
    if sigma != "N":
        b = np.conj(b)
    return float(np.abs(a - b).max())


# ---------------------------------------------------------------------------
# the lightcone model

@dataclass(frozen=True)
class VVector:
    """Element (or field of elements) ``(A, r)`` of V, possibly complexified."""

    A: np.ndarray
    r: np.ndarray

    def is_real(self, tol=1e-12):
        A = np.asarray(self.A)
        herm = np.abs(A - np.conj(np.swapaxes(A, -1, -2))).max() <= tol
        return bool(herm and np.abs(np.imag(self.r)).max() <= tol)


def minkowski_q(v: VVector):
    return -np.linalg.det(np.asarray(v.A, complex)) + np.asarray(v.r) ** 2


def v_inner(v: VVector, w: VVector):
    """Complex-bilinear form polarising q: ``(tr(AB) - tr A tr B)/2 + r s``."""
    A, B = np.asarray(v.A), np.asarray(w.A)
    trAB = np.einsum("...ij,...ji->...", A, B)
    trA, trB = np.trace(A, axis1=-2, axis2=-1), np.trace(B, axis1=-2, axis2=-1)
    return (trAB - trA * trB) / 2 + np.asarray(v.r) * np.asarray(w.r)


def isometry_psi(x) -> VVector:
    x = np.asarray(x)
    x0, x1, x2, x3, x4 = (x[..., i] for i in range(5))
    A = np.stack([np.stack([x0 + x1, x2 + 1j * x3], -1),
                  np.stack([x2 - 1j * x3, x0 - x1], -1)], -2)
    return VVector(A, x4)


def psi_inverse(v: VVector) -> np.ndarray:
    """Coordinates in R^{4,1} (complex if v is complexified)."""
    A = np.asarray(v.A)
    a, d = A[..., 0, 0], A[..., 1, 1]
    b, c = A[..., 0, 1], A[..., 1, 0]
    return np.stack([(a + d) / 2, (a - d) / 2, (b + c) / 2, (b - c) / 2j,
                     np.broadcast_to(v.r, a.shape)], -1)


def embed_hatf(Fp: FrameField, Fm: FrameField) -> VVector:
    """``f^ = ((F^{-1})^{-1} F^{1}, 1)``; equals ``(conj(F)^T F, 1)`` for tau-real families."""
    if Fp.lam != 1 or Fm.lam != -1:
        raise ValueError("embed_hatf expects the frames at lambda = +1 and -1")
    A = matmul(np.linalg.inv(Fm.F), Fp.F)
    herm = np.abs(A - np.conj(np.swapaxes(A, -1, -2))).max()
    if herm > 1e-6 * max(1.0, np.abs(A).max()):
        raise ValueError("frames do not satisfy the hyperbolic reality condition")
    return VVector(A, np.ones(A.shape[:-2]))


_E = {
    "Id": np.eye(2, dtype=complex),
    "E12": np.array([[0, 1], [0, 0]], complex),
    "E21": np.array([[0, 0], [1, 0]], complex),
    "S3": np.diag([1.0 + 0j, -1.0]),
}


def _coords(A, r):
    """Coordinates w.r.t. ``e1 = (Id,0), e2 = (E12,0), e3 = (E21,0), e4 = (0,1), e5 = (diag(1,-1),0)``."""
    a, d = A[..., 0, 0], A[..., 1, 1]
    r = np.broadcast_to(r, a.shape)
    return np.stack([(a + d) / 2, A[..., 0, 1], A[..., 1, 0], r, (a - d) / 2], -1)


def psi_frame(F: FrameField) -> list[VVector]:
    """``psi_1..psi_5``: ``(F*UF, 0)`` for U = Id, E12, E21, then (0,1), then U = diag(1,-1)."""
    Fs = np.conj(np.swapaxes(F.F, -1, -2))
    zero = np.zeros(F.F.shape[:-2])
    out = [VVector(matmul(Fs, matmul(_E[k], F.F)), zero) for k in ("Id", "E12", "E21")]
    out.append(VVector(np.zeros_like(F.F), np.ones(F.F.shape[:-2])))
    out.append(VVector(matmul(Fs, matmul(_E["S3"], F.F)), zero))
    return out


def frame_matrix(frame: list[VVector]) -> np.ndarray:
    """Columns are the e-coordinates of the frame vectors: shape (nx, ny, 5, 5)."""
    return np.stack([_coords(v.A, v.r) for v in frame], -1)


def so5_closed_form(sol: SolutionData, lam):
    """The dz and dzbar connection matrices of the psi-frame (D^lambda = d + Omega).

    Column j holds the coefficients of ``D psi_j`` in the frame; the entries
    coupling psi_5 to the sphere part carry ``lambda^{-1}`` (dz) and
    ``lambda`` (dzbar).
    """
    u, q = sol.u, sol.q
    uz, uzb = dz_dzbar(sol.domain, u.astype(complex))
    eu, emu = np.exp(u), np.exp(-u)
    Oz = np.zeros(u.shape + (5, 5), complex)
    Ozb = np.zeros_like(Oz)
    Oz[..., 0, 2] = -eu
    Oz[..., 1, 0] = -2 * eu
    Oz[..., 1, 1] = uz
    Oz[..., 2, 2] = -uz
    Oz[..., 2, 4] = 2 * q * emu / lam
    Oz[..., 4, 1] = -q * emu / lam
    Ozb[..., 0, 1] = -eu
    Ozb[..., 1, 1] = -uzb
    Ozb[..., 1, 4] = lam * 2 * np.conj(q) * emu
    Ozb[..., 2, 0] = -2 * eu
    Ozb[..., 2, 2] = uzb
    Ozb[..., 4, 2] = -lam * np.conj(q) * emu
    return Oz, Ozb


def _scale_normal_block(Oz, Ozb, lam):
    """Turn the flat (lambda = 1) connection into D^lambda by rescaling the S-N block."""
    Oz, Ozb = Oz.copy(), Ozb.copy()
    for O, f in ((Oz, 1 / lam), (Ozb, lam)):
        O[..., 4, :4] *= f
        O[..., :4, 4] *= f
    return Oz, Ozb


def numeric_connection(F: FrameField, max_cond=1e8):
    """Least-squares ``Omega`` with ``d P = P Omega`` for the psi-frame matrix P."""
    P = frame_matrix(psi_frame(F))
    cond = np.linalg.cond(P)
    if not np.all(np.isfinite(cond)) or cond.max() > max_cond:
        raise IllConditionedError(f"psi-frame condition number {cond.max():.2e}")
    Pz, Pzb = dz_dzbar(F.domain, P)
    shp = P.shape[:-2]
    flatP = P.reshape(-1, 5, 5)
    Oz = np.stack([np.linalg.lstsq(a, b, rcond=None)[0]
                   for a, b in zip(flatP, Pz.reshape(-1, 5, 5))]).reshape(shp + (5, 5))
    Ozb = np.stack([np.linalg.lstsq(a, b, rcond=None)[0]
                    for a, b in zip(flatP, Pzb.reshape(-1, 5, 5))]).reshape(shp + (5, 5))
    return Oz, Ozb


def so5_connection_check(sol: SolutionData, F: FrameField, lams, margin=None) -> float:
    """Sup deviation of the numerically extracted psi-frame connection from the closed form."""
    Oz1, Ozb1 = numeric_connection(F)
    idx = F.domain.interior(margin)
    dev = 0.0
    for lam in lams:
        nz, nzb = _scale_normal_block(Oz1, Ozb1, lam)
        cz, czb = so5_closed_form(sol, lam)
        dev = max(dev, float(np.abs((nz - cz)[idx]).max()), float(np.abs((nzb - czb)[idx]).max()))
    return dev


_E_TILDE = [("S3", 1.0), ("E12", 1.0), ("E21", -1.0), (None, 1.0), ("Id", 1.0)]


def dual_connection(famhat: LambdaFamily, lam):
    """Connection matrices of ``D^(A, f) = (dA + xi^(-lam) A - A xi^(lam), df)`` in the frame e~."""
    xm, xp = evaluate(famhat, -lam), evaluate(famhat, lam)
    shp = famhat.domain.shape
    Oz = np.zeros(shp + (5, 5), complex)
    Ozb = np.zeros_like(Oz)
    basis = []
    for name, sgn in _E_TILDE:
        basis.append(None if name is None else sgn * _E[name])
    # coordinates in e~: solve with the constant 5x5 change of basis e -> e~
    T = np.stack([_coords(b, 0.0) if b is not None else np.array([0, 0, 0, 1, 0], complex)
                  for b in basis], -1)
    Tinv = np.linalg.inv(T)
    for j, E in enumerate(basis):
        if E is None:
            continue  # the scalar slot is parallel
        for O, a, b in ((Oz, xm.dz, xp.dz), (Ozb, xm.dzbar, xp.dzbar)):
            img = matmul(a, E) - matmul(E, b)
            O[..., :, j] = np.einsum("ij,...j->...i", Tinv, _coords(img, 0.0))
    return Oz, Ozb


def dual_so5_equivalence(famhat: LambdaFamily, sol: SolutionData, lams) -> float:
    """Sup deviation between the dual-surface SO(5) connection and the closed form."""
    dev = 0.0
    for lam in lams:
        nz, nzb = dual_connection(famhat, lam)
        cz, czb = so5_closed_form(sol, lam)
        dev = max(dev, float(np.abs(nz - cz).max()), float(np.abs(nzb - czb).max()))
    return dev


# ---------------------------------------------------------------------------
# surface geometry of f^

def _hyperboloid_point(hatf: VVector):
    """Real R^{3,1} coordinates of f^ scaled to the slice x_4 = 1."""
    x = np.real(psi_inverse(hatf))
    return x[..., :4] / x[..., 4:5]


def _mink(a, b):
    return -a[..., 0] * b[..., 0] + np.einsum("...i,...i->...", a[..., 1:], b[..., 1:])


def _normal(X, Xx, Xy):
    """Unit Minkowski normal tangent to the hyperboloid."""
    M = np.stack([X, Xx, Xy], -2)  # (..., 3, 4)
    n = np.empty(X.shape)
    for k in range(4):
        minor = np.delete(M, k, axis=-1)
        n[..., k] = (-1) ** k * np.linalg.det(minor)
    n[..., 0] = -n[..., 0]  # raise the index with eta
    return n / np.sqrt(np.abs(_mink(n, n)))[..., None]


def surface_geometry(domain: Domain, hatf: VVector):
    """First/second fundamental forms of the surface in the hyperboloid model of H^3.

    Returns a dict of pointwise fields: metric ``E, F, G``, mean curvature
    ``H``, extrinsic ``K_ext``, intrinsic ``K`` (= K_ext - 1), area density
    ``dA`` and the Willmore density ``(H^2 - K + Kbar) dA`` per dx dy.
    """
    from .grid import grid_partials

    X = _hyperboloid_point(hatf)
    Xx, Xy = grid_partials(domain, X)
    Xxx, Xxy = grid_partials(domain, Xx)
    _, Xyy = grid_partials(domain, Xy)
    Xx, Xy, Xxx, Xxy, Xyy = (np.real(v) for v in (Xx, Xy, Xxx, Xxy, Xyy))
    E, Fm, G = _mink(Xx, Xx), _mink(Xx, Xy), _mink(Xy, Xy)
    det = E * G - Fm**2
    if det.min() <= 1e-16:
        raise DegenerateSurfaceError("induced metric degenerates")
    N = _normal(X, Xx, Xy)
    L, M, Nn = _mink(Xxx, N), _mink(Xxy, N), _mink(Xyy, N)
    H = (E * Nn - 2 * Fm * M + G * L) / (2 * det)
    Kext = (L * Nn - M**2) / det
    dA = np.sqrt(det)
    Kbar = -1.0
    K = Kext + Kbar
    return {"E": E, "F": Fm, "G": G, "H": H, "K_ext": Kext, "K": K, "dA": dA,
            "willmore": (H**2 - K + Kbar) * dA}


@dataclass
class WillmoreReport:
    domain: Domain
    u: np.ndarray
    algebraic: np.ndarray
    frame: np.ndarray
    geometric: np.ndarray
    H: np.ndarray
    K: np.ndarray
    metric_factor: float
    metric_defect: float

    def deviations(self, margin=None):
        idx = self.domain.interior(margin)
        scale = max(1.0, np.abs(self.algebraic[idx]).max())
        return {
            "algebraic_vs_frame": float(np.abs(self.algebraic - self.frame).max()),
            "geometric_vs_algebraic": float(np.abs(self.geometric - self.algebraic)[idx].max() / scale),
            "mean_curvature": float(np.abs(self.H[idx]).max()),
            "metric": self.metric_defect,
        }

    def write_csv(self, path):
        s, t = self.domain.lattice()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "u", "integrand_a", "integrand_b", "integrand_c", "H", "K"])
            for idx in np.ndindex(*self.domain.shape):
                w.writerow([f"{s[idx]:.10g}", f"{t[idx]:.10g}", f"{self.u[idx]:.12g}",
                            f"{self.algebraic[idx]:.12g}", f"{self.frame[idx]:.12g}",
                            f"{self.geometric[idx]:.12g}", f"{self.H[idx]:.6g}",
                            f"{self.K[idx]:.12g}"])


def willmore_compare(sol: SolutionData, famhat: LambdaFamily, hatf: VVector, margin=None) -> WillmoreReport:
    """Three versions of the Willmore integrand, as densities against dx dy.

    (a) from the frame data, ``2i |q|^2 e^{-2u} dz^dzbar``; (b) from the dual
    family, ``-2i tr(Phi^ ^ Psi^)``; (c) from the second fundamental form of
    f^ in the hyperboloid model.  Also calibrates ``induced metric / e^{2u}``
    at the first interior point and reports its spread elsewhere.
    """
    from .grid import DZ_DZBAR

    if np.exp(2 * sol.u).min() < 1e-8:
        raise DegenerateSurfaceError("conformal factor e^{2u} below 1e-8")
    alg = np.real(DZ_DZBAR * 2j * np.abs(sol.q) ** 2 * np.exp(-2 * sol.u))
    phi = famhat.coefficient(-1).part("10")
    psi = famhat.coefficient(1).part("01")
    w = wedge(phi, psi)
    frame = np.real(DZ_DZBAR * -2j * np.trace(w.values, axis1=-2, axis2=-1))
    geo = surface_geometry(sol.domain, hatf)
    idx = sol.domain.interior(margin)
    ratio = (geo["E"] / np.exp(2 * sol.u))[idx]
    factor = float(ratio.flat[0])  # single-point calibration, then frozen
    defect = max(float(np.abs(ratio - factor).max()),
                 float(np.abs(geo["G"] / np.exp(2 * sol.u) - factor)[idx].max()),
                 float(np.abs(geo["F"])[idx].max()))
    return WillmoreReport(sol.domain, sol.u, alg, frame, geo["willmore"], geo["H"], geo["K"],
                          factor, defect)


def mean_curvature_sphere(domain: Domain, hatf: VVector, margin=None, rank_tol=1e-8):
    """Real span of ``f^, Re f^_z, Im f^_z, f^_{z zbar}`` in R^{4,1}.

    Returns ``(basis, signature, e4_defect)`` with ``basis`` of shape
    (nx, ny, 5, 4) Euclidean-orthonormal columns, the (positive, negative)
    eigenvalue counts of the restricted Minkowski form at every point, and
    the norm of the component of e_4 = (0,1) orthogonal to the span.
    """
    x = np.real(psi_inverse(hatf))
    xz, _ = dz_dzbar(domain, x.astype(complex))
    _, xzzb = dz_dzbar(domain, xz)
    vecs = np.stack([x, xz.real, xz.imag, np.real(xzzb)], -1)  # (..., 5, 4)
    Q, R = np.linalg.qr(vecs)
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    idx = domain.interior(margin)
    if (diag[idx].min(axis=-1) / diag[idx].max(axis=-1)).min() < rank_tol:
        raise RankError("mean curvature sphere loses rank (branch point?)")
    gram = np.einsum("...ia,ij,...jb->...ab", Q, ETA, Q)
    ev = np.linalg.eigvalsh(gram)
    sig = np.stack([(ev > 0).sum(-1), (ev < 0).sum(-1)], -1)
    e4 = np.zeros(5)
    e4[4] = 1.0
    # Minkowski-orthogonal decomposition e4 = s + n with s in the span
    rhs = np.einsum("...ia,ij,j->...a", Q, ETA, e4)
    c = np.linalg.solve(gram, rhs[..., None])[..., 0]
    n = e4 - np.einsum("...ia,...a->...i", Q, c)
    return Q, sig, np.linalg.norm(n, axis=-1)


def sphere_congruence_defect(F: FrameField, margin=None) -> float:
    """Rank test: f^ and its first and mixed second derivatives stay in span(psi_1..psi_4).

    Returns the largest fifth singular value of ``[psi_1..psi_4, f^_z, f^_zbar, f^_{z zbar}]``
    relative to the largest one.
    """
    frame = psi_frame(F)
    P = frame_matrix(frame[:4])
    hf = P[..., 0]
    hz, hzb = dz_dzbar(F.domain, hf)
    _, hzzb = dz_dzbar(F.domain, hz)
    M = np.concatenate([P, np.stack([hz, hzb, hzzb], -1)], -1)  # (..., 5, 7)
    sv = np.linalg.svd(M, compute_uv=False)
    rel = sv[..., 4] / sv[..., 0]
    return float(rel[F.domain.interior(margin)].max())
