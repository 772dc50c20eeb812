"""Dense complex linear algebra.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The eigensolvers
are implemented here (compiled kernels in :mod:`perturbatrix._kernels`) so that
they can act as an independent oracle for the continuation code; LAPACK is
used only for the small utility pieces (linear solves, determinants, SVD).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .errors import (
    DegenerateLeadingCoefficient,
    DimensionMismatch,
    InvalidMatrix,
    MatrixExpOverflow,
    NoConvergence,
    NotHermitian,
    UnstablePolynomialPath,
)

HERMITIAN_TOL = 1e-12
MAX_GENERAL_N = 512
MAX_FADDEEV_N = 64


def as_matrix(a, *, square: bool = True, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``a`` to a finite complex 2-D array."""
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidMatrix(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return arr


def hermitian_residual(a: np.ndarray) -> float:
    """Relative Frobenius distance of ``a`` from its adjoint."""
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / nrm)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    return hermitian_residual(np.asarray(a, dtype=np.complex128)) <= tol


@dataclass(frozen=True)
class HermitianEigenSystem:
    """Eigenvalues in ascending order and a unitary matrix of eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    def function(self, f) -> np.ndarray:
        """Apply a scalar function through the spectral decomposition."""
        u = self.eigenvectors
        return (u * f(self.eigenvalues)) @ u.conj().T


@dataclass(frozen=True)
class ComplexEigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def hermitian_eig(a, *, tol: float = HERMITIAN_TOL) -> HermitianEigenSystem:
    """Eigen-decomposition of a Hermitian matrix.

    Householder reduction to a real tridiagonal matrix followed by implicit QL
    iteration with Wilkinson shifts.

    Raises
    ------
    NotHermitian
        if ``||A - A^*||_F > tol * ||A||_F``.
    NoConvergence
        if more than ``30 N`` QL sweeps are needed.
    """
    a = as_matrix(a)
    if hermitian_residual(a) > tol:
        raise NotHermitian(f"Hermitian residual {hermitian_residual(a):.3e} exceeds {tol:g}")
    n = a.shape[0]
    herm = 0.5 * (a + a.conj().T)
    d, e, q = _kernels.hermitian_tridiagonalize(herm)
    z = np.eye(n)
    status = _kernels.tridiagonal_ql(d, e, z, 30 * n)
    if status < 0:
        raise NoConvergence(f"tridiagonal QL did not converge within {30 * n} sweeps")
    order = np.argsort(d, kind="stable")
    vecs = q @ z[:, order]
    return HermitianEigenSystem(eigenvalues=d[order].copy(), eigenvectors=vecs)


def general_eig(a, *, vectors: bool = False, balance: bool = True) -> ComplexEigenSystem:
    """Eigenvalues (and optionally eigenvectors) of a general complex matrix.

    Balancing, Householder reduction to Hessenberg form, then complex
    single-shift QR with Wilkinson shifts and deflation.  Eigenvalues are
    returned in the order they appear on the diagonal of the Schur form.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if n > MAX_GENERAL_N:
        raise InvalidMatrix(f"general_eig supports N <= {MAX_GENERAL_N}, got {n}")
    h = a.copy()
    scale = _kernels.balance(h) if balance else np.ones(n)
    q = np.eye(n, dtype=np.complex128)
    _kernels.hessenberg(h, q, vectors)
    status = _kernels.hessenberg_qr(h, q, vectors, 40 * n)
    if status:
        raise NoConvergence(f"QR iteration stalled at row {status - 1} after {40 * n} iterations")
    lam = np.diag(h).copy()
    if not vectors:
        return ComplexEigenSystem(lam)
    t = np.triu(h)
    y = _kernels.triangular_eigenvectors(t)
    x = scale[:, None] * (q @ y)
    x /= np.linalg.norm(x, axis=0)
    return ComplexEigenSystem(lam, x)


def eigenvalues(a) -> np.ndarray:
    return general_eig(a).eigenvalues


# ---------------------------------------------------------------------------
# polynomials (coefficients highest degree first, as numpy.polyval)
# ---------------------------------------------------------------------------

def char_poly(a) -> np.ndarray:
    """Coefficients of ``det(lambda I - A)`` by Faddeev-LeVerrier.

    Refused above ``N = 64`` where the recursion loses all accuracy.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if n > MAX_FADDEEV_N:
        raise UnstablePolynomialPath(
            f"Faddeev-LeVerrier refused for N={n} > {MAX_FADDEEV_N}; use general_eig")
    coeffs = np.zeros(n + 1, dtype=np.complex128)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    eye = np.eye(n, dtype=np.complex128)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def poly_from_roots(roots) -> np.ndarray:
    """Monic polynomial with the given roots, multiplied as a balanced tree."""
    factors = [np.array([1.0, -r], dtype=np.complex128) for r in np.asarray(roots).ravel()]
    if not factors:
        return np.ones(1, dtype=np.complex128)
    while len(factors) > 1:
        paired = [np.convolve(factors[i], factors[i + 1]) for i in range(0, len(factors) - 1, 2)]
        if len(factors) % 2:
            paired.append(factors[-1])
        factors = paired
    return factors[0]


def poly_roots(coeffs, *, newton_steps: int = 3) -> np.ndarray:
    """All roots of a polynomial via its companion matrix.

    Each root from :func:`general_eig` is polished by ``newton_steps`` Newton
    iterations, keeping a step only if it reduces ``|p|``.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128))
    if c.ndim != 1 or c.size < 2:
        raise DegenerateLeadingCoefficient("polynomial must have degree >= 1")
    if c[0] == 0:
        raise DegenerateLeadingCoefficient("leading coefficient is zero")
    if not np.all(np.isfinite(c)):
        raise InvalidMatrix("non-finite polynomial coefficients")
    monic = c / c[0]
    deg = monic.size - 1
    if deg == 1:
        return np.array([-monic[1]])
    comp = np.zeros((deg, deg), dtype=np.complex128)
    comp[0, :] = -monic[1:]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    roots = general_eig(comp).eigenvalues
    dcoef = np.polyder(monic)
    for _ in range(newton_steps):
        val = np.polyval(monic, roots)
        der = np.polyval(dcoef, roots)
        ok = der != 0
        cand = roots.copy()
        cand[ok] = roots[ok] - val[ok] / der[ok]
        better = np.abs(np.polyval(monic, cand)) < np.abs(val)
        roots = np.where(better, cand, roots)
    return roots


# ---------------------------------------------------------------------------
# matrix exponential and norms
# ---------------------------------------------------------------------------

_PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
_THETA13 = 5.371920351148152


def matrix_exp(a, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` by scaling and squaring with the degree-13 Pade approximant."""
    a = as_matrix(a)
    x = t * a
    norm1 = float(np.max(np.sum(np.abs(x), axis=0)))
    if norm1 > 1e4:
        raise InvalidMatrix(f"|t| * ||A||_1 = {norm1:.3e} exceeds 1e4")
    n = x.shape[0]
    s = 0 if norm1 <= _THETA13 else int(np.ceil(np.log2(norm1 / _THETA13)))
    x = x / 2.0 ** s
    b = _PADE13
    eye = np.eye(n, dtype=np.complex128)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x2 @ x4
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
             + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * eye)
    v = x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * eye
    with np.errstate(over="raise", invalid="raise"):
        try:
            r = np.linalg.solve(v - u, v + u)
            for _ in range(s):
                r = r @ r
        except FloatingPointError as exc:
            raise MatrixExpOverflow("overflow while squaring the Pade approximant") from exc
    if not np.all(np.isfinite(r)):
        raise MatrixExpOverflow("matrix exponential is not representable")
    return r


def operator_norm(a, *, rtol: float = 1e-10, max_iter: int = 20000) -> float:
    """Largest singular value by power iteration on ``A^* A``."""
    a = as_matrix(a, square=False)
    if not np.any(a):
        return 0.0
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    # stop on a much tighter change than rtol: the change underestimates the
    # error by the (unknown) convergence ratio
    for _ in range(max_iter):
        y = a.conj().T @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            x = rng.standard_normal(a.shape[1]) + 0j
            x /= np.linalg.norm(x)
            continue
        new = np.sqrt(ny)
        x = y / ny
        if abs(new - est) <= 1e-3 * rtol * new:
            est = new
            break
        est = new
    return float(np.linalg.norm(a @ x))


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

def range_basis(a, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ``Ran(A)`` (singular values above ``rtol * ||A||``)."""
    a = np.asarray(a, dtype=np.complex128)
    u, s, _ = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0), dtype=np.complex128)
    return u[:, s > rtol * s[0]]


def null_space(a, rtol: float = 1e-12) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    _, s, vh = np.linalg.svd(a)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * top)) if top > 0 else 0
    return vh[rank:].conj().T


def complete_basis(e) -> np.ndarray:
    """Unitary Householder reflector whose first column is the unit vector ``e``.

    The remaining columns are an orthonormal basis of ``e^perp``.
    """
    e = np.asarray(e, dtype=np.complex128).ravel()
    n = e.size
    e0 = e[0]
    phase = e0 / abs(e0) if abs(e0) > 0 else 1.0 + 0j
    v = e.copy()
    v[0] += phase
    nv = np.linalg.norm(v)
    h = np.eye(n, dtype=np.complex128) - 2.0 * np.outer(v, v.conj()) / nv ** 2
    # h @ e1 = -phase * e: rescale the column so it equals e exactly
    h[:, 0] *= -phase
    return h


def truncate(a, basis) -> np.ndarray:
    """Compression ``V^* A V`` of ``A`` to the span of orthonormal ``V``."""
    v = np.asarray(basis, dtype=np.complex128)
    return v.conj().T @ np.asarray(a, dtype=np.complex128) @ v


def principal_angles(u, v) -> np.ndarray:
    """Principal angles between the spans of orthonormal ``u`` and ``v``."""
    if u.shape[1] == 0 or v.shape[1] == 0:
        return np.zeros(0)
    c = np.linalg.svd(u.conj().T @ v, compute_uv=False)
    angles = np.arccos(np.clip(c, -1.0, 1.0))
    # arccos loses half the digits near 0; small angles come from the sines
    if u.shape[1] >= v.shape[1]:
        resid = v - u @ (u.conj().T @ v)
    else:
        resid = u - v @ (v.conj().T @ u)
    s = np.sort(np.linalg.svd(resid, compute_uv=False))
    k = min(angles.size, s.size)
    small = np.arcsin(np.clip(s[:k], 0.0, 1.0))
    angles = np.sort(angles)
    return np.where(angles[:k] < np.pi / 4, small, angles[:k])


def psd_sqrt(a, rtol: float = 1e-12) -> np.ndarray:
    es = hermitian_eig(0.5 * (a + np.conj(a).T), tol=1e-8)
    top = max(abs(es.eigenvalues[0]), abs(es.eigenvalues[-1]))
    return es.function(lambda w: np.sqrt(np.where(w > rtol * top, w, 0.0)))


def psd_pinv_sqrt(a, rtol: float = 1e-12) -> np.ndarray:
    es = hermitian_eig(0.5 * (a + np.conj(a).T), tol=1e-8)
    top = max(abs(es.eigenvalues[0]), abs(es.eigenvalues[-1]))
    keep = es.eigenvalues > rtol * top
    return es.function(lambda w: np.where(keep, 1.0 / np.sqrt(np.where(keep, w, 1.0)), 0.0))


# ---------------------------------------------------------------------------
# spectrum comparison
# ---------------------------------------------------------------------------

def match_spectra(a, b) -> tuple[float, np.ndarray]:
    """Pair two eigenvalue multisets; returns ``(max distance, perm)``.

    ``b[perm[i]]`` is paired with ``a[i]``.  Greedy closest-pair matching for
    ``N <= 8``, Hungarian assignment on the distance matrix above that.
    """
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if a.size != b.size:
        raise DimensionMismatch(f"cannot pair {a.size} with {b.size} eigenvalues")
    dist = np.abs(a[:, None] - b[None, :])
    n = a.size
    if n == 0:
        return 0.0, np.zeros(0, dtype=int)
    if n <= 8:
        perm = np.full(n, -1)
        d = dist.copy()
        for _ in range(n):
            i, j = np.unravel_index(np.argmin(d), d.shape)
            perm[i] = j
            d[i, :] = np.inf
            d[:, j] = np.inf
    else:
        rows, cols = linear_sum_assignment(dist)
        perm = np.empty(n, dtype=int)
        perm[rows] = cols
    return float(np.max(dist[np.arange(n), perm])), perm


def spectral_distance(a, b) -> float:
    return match_spectra(a, b)[0]
