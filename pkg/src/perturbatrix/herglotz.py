"""Birman-Schwinger functions, their spectral measures, and the rank-one secular pair.

For ``B = B^* >= 0`` with range ``K`` the operator-valued function

    m(lambda) = B^1/2 (A - lambda)^-1 B^1/2   restricted to K
              = sum_j Q_j / (s_j - lambda)

is Herglotz on the upper half-plane, and ``lambda`` is an eigenvalue of
``A + gamma B`` exactly when ``-1/gamma`` is an eigenvalue of ``m(lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NotHermitian,
    NotInUpperHalfPlane,
    NotPSD,
    NotUnitVector,
    PoleProximity,
    SpectrumCollision,
    ZeroDenominator,
)
from .linalg import (
    HermitianEigenSystem,
    as_matrix,
    char_poly,
    complete_basis,
    hermitian_eig,
    is_hermitian,
    poly_from_roots,
    poly_roots,
    range_basis,
    truncate,
)

COALESCE_RTOL = 1e-10
POLE_RTOL = 1e-14
FADDEEV_MAX_N = 20
UNIT_TOL = 1e-10


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite atomic measure with PSD ``M x M`` weights.

    ``locations`` is strictly increasing; ``weights[j]`` is the atom at
    ``locations[j]``.  ``basis`` (optional) is the orthonormal basis of
    ``K`` in which the weights are written.
    """

    locations: np.ndarray
    weights: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=np.complex128)
        if w.ndim == 1:
            w = w[:, None, None]
        if w.shape[0] != loc.size or w.shape[1] != w.shape[2]:
            raise DimensionMismatch("weights must have shape (J, M, M) matching locations")
        if loc.size > 1 and np.any(np.diff(loc) <= 0):
            raise DimensionMismatch("atom locations must be strictly increasing")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def scalar(cls, locations, weights) -> "SpectralMeasure":
        """Scalar measure from (possibly unsorted, repeated) atoms."""
        loc = np.asarray(locations, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if np.any(w < 0):
            raise NotPSD("scalar weights must be nonnegative")
        order = np.argsort(loc, kind="stable")
        loc, w = loc[order], w[order]
        locs, ws = _coalesce(loc, w[:, None, None].astype(np.complex128))
        return cls(locs, ws)

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.locations.size

    @property
    def is_scalar(self) -> bool:
        return self.dimension == 1

    def total_mass(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    def mask(self, a: float, b: float) -> np.ndarray:
        return (self.locations >= a) & (self.locations <= b)

    def mass_on(self, a: float, b: float) -> np.ndarray:
        """``Q([a, b])``."""
        m = self.mask(a, b)
        if not np.any(m):
            return np.zeros((self.dimension, self.dimension), dtype=np.complex128)
        return self.weights[m].sum(axis=0)

    def integrate(self, f, a: float = -np.inf, b: float = np.inf) -> np.ndarray:
        """``sum f(s_j) Q_j`` over atoms in ``[a, b]``."""
        m = self.mask(a, b)
        vals = np.asarray([f(s) for s in self.locations[m]], dtype=np.complex128)
        if vals.size == 0:
            return np.zeros((self.dimension, self.dimension), dtype=np.complex128)
        return np.tensordot(vals, self.weights[m], axes=1)


def _coalesce(loc: np.ndarray, w: np.ndarray, rtol: float = COALESCE_RTOL):
    """Merge sorted atoms closer than ``rtol * spread``; positions become weighted means."""
    if loc.size == 0:
        return loc, w
    spread = loc[-1] - loc[0]
    tol = rtol * (spread if spread > 0 else max(1.0, abs(loc[0])))
    groups = [[0]]
    for i in range(1, loc.size):
        if loc[i] - loc[groups[-1][0]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    locs = np.array([loc[g].mean() for g in groups])
    ws = np.stack([w[g].sum(axis=0) for g in groups])
    return locs, ws


def build_measure(a, b, *, rtol: float = 1e-12) -> SpectralMeasure:
    """Spectral measure ``Q_j = (B^1/2 P_j B^1/2)`` truncated to ``Ran(B)``.

    ``a`` is a Hermitian matrix or a precomputed :class:`HermitianEigenSystem`;
    ``b`` must be Hermitian positive semidefinite.
    """
    es = a if isinstance(a, HermitianEigenSystem) else hermitian_eig(as_matrix(a, name="A"))
    b = as_matrix(b, name="B")
    if b.shape[0] != es.n:
        raise DimensionMismatch(f"A is {es.n}x{es.n} but B is {b.shape}")
    if not is_hermitian(b):
        raise NotPSD("B must be Hermitian to have a square root")
    bes = hermitian_eig(b)
    nb = max(abs(bes.eigenvalues[0]), abs(bes.eigenvalues[-1]))
    if bes.eigenvalues[0] < -rtol * nb:
        raise NotPSD(f"B has negative eigenvalue {bes.eigenvalues[0]:.3e}")
    keep = bes.eigenvalues > rtol * nb
    basis = bes.eigenvectors[:, keep]
    # B^1/2 V = V diag(sqrt(b_k)) on the range, so Q_j = D V^* P_j V D
    root = np.sqrt(bes.eigenvalues[keep])
    c = basis.conj().T @ es.eigenvectors
    per_vec = np.einsum("kr,lr->rkl", c, c.conj())
    per_vec = root[None, :, None] * per_vec * root[None, None, :]
    locs, ws = _coalesce(es.eigenvalues, per_vec)
    ws = 0.5 * (ws + np.conj(np.transpose(ws, (0, 2, 1))))
    return SpectralMeasure(locs, ws, basis)


def rank_one_measure(a, e) -> SpectralMeasure:
    """Scalar measure with atoms ``(lambda_r, |<e, u_r>|^2)``."""
    es = a if isinstance(a, HermitianEigenSystem) else hermitian_eig(as_matrix(a, name="A"))
    e = np.asarray(e, dtype=np.complex128).ravel()
    if e.size != es.n:
        raise DimensionMismatch(f"e has length {e.size}, A is {es.n}x{es.n}")
    w = np.abs(es.eigenvectors.conj().T @ e) ** 2
    return SpectralMeasure.scalar(es.eigenvalues, w)


class HerglotzFunction:
    """``m(lambda) = sum_j Q_j / (s_j - lambda)`` for a finite atomic measure."""

    def __init__(self, measure: SpectralMeasure):
        self.measure = measure
        loc = measure.locations
        self._scale = max(1.0, float(np.max(np.abs(loc)))) if loc.size else 1.0

    @property
    def is_scalar(self) -> bool:
        return self.measure.is_scalar

    def _check_pole(self, lam: complex):
        if self.measure.size == 0:
            return
        d = np.min(np.abs(self.measure.locations - lam))
        if d <= POLE_RTOL * self._scale:
            raise PoleProximity(f"lambda = {lam} is within {d:.2e} of an atom")

    def _sum(self, lam: complex, power: int):
        lam = complex(lam)
        self._check_pole(lam)
        c = 1.0 / (self.measure.locations - lam) ** power
        out = np.tensordot(c, self.measure.weights, axes=1)
        return complex(out[0, 0]) if self.is_scalar else out

    def __call__(self, lam: complex):
        return self._sum(lam, 1)

    def derivative(self, lam: complex):
        """``m'(lambda) = sum_j Q_j / (s_j - lambda)^2``."""
        return self._sum(lam, 2)

    def evaluate_many(self, lams) -> np.ndarray:
        """Vectorized scalar evaluation (no pole check)."""
        if not self.is_scalar:
            raise DimensionMismatch("evaluate_many is only defined for scalar measures")
        lams = np.asarray(lams, dtype=np.complex128)
        w = self.measure.weights[:, 0, 0].real
        s = self.measure.locations
        return np.sum(w / (s - lams[..., None]), axis=-1)


def eval_m(mu: HerglotzFunction, lam: complex):
    return mu(lam)


def eval_m_derivative(mu: HerglotzFunction, lam: complex):
    return mu.derivative(lam)


def gamma_of_lambda(mu: HerglotzFunction, lam: complex) -> complex:
    """The unique coupling ``gamma = -1/m(lambda)`` with ``lambda`` in ``Spec(A + gamma B)``."""
    if not mu.is_scalar:
        raise DimensionMismatch("gamma_of_lambda needs a rank-one (scalar) measure")
    lam = complex(lam)
    if lam.imag <= 0:
        raise NotInUpperHalfPlane(f"lambda = {lam} is not in the upper half-plane")
    m = mu(lam)
    if m == 0:
        raise ZeroDenominator("m(lambda) vanished: the measure has no mass")
    return -1.0 / m


def couplings_at(mu: HerglotzFunction, lam: complex, *, rtol: float = 1e-12) -> np.ndarray:
    """All ``gamma`` with ``-1/gamma`` in ``Spec(m(lambda))``, i.e. ``lambda`` in ``Spec(A_gamma)``.

    Zero eigenvalues of ``m(lambda)`` (directions without mass) give no coupling.
    """
    m = mu(lam)
    ev = np.array([m]) if mu.is_scalar else np.linalg.eigvals(np.atleast_2d(m))
    top = np.max(np.abs(ev)) if ev.size else 0.0
    ev = ev[np.abs(ev) > rtol * top] if top > 0 else ev[:0]
    return -1.0 / ev


# ---------------------------------------------------------------------------
# rank-one secular pair
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SecularPair:
    """``p(gamma, lambda) = p0(lambda) + gamma p1(lambda)`` for ``B = <., e> e``.

    ``p0 = det(A - lambda)`` and ``p1 = det(A# - lambda)`` with ``A#`` the
    compression of ``A`` to ``e^perp``.  Coefficients are real, highest
    degree first; ``alphas`` and ``deltas`` are their ascending roots.
    """

    p0: np.ndarray
    p1: np.ndarray
    alphas: np.ndarray
    deltas: np.ndarray

    @property
    def n(self) -> int:
        return self.alphas.size

    def coefficients(self, gamma: complex) -> np.ndarray:
        c = self.p0.astype(np.complex128).copy()
        c[1:] += complex(gamma) * self.p1
        return c

    def evaluate(self, gamma: complex, lam):
        """Evaluate in product form, which is better conditioned than Horner."""
        lam = np.asarray(lam, dtype=np.complex128)
        q0 = np.prod(self.alphas - lam[..., None], axis=-1)
        q1 = np.prod(self.deltas - lam[..., None], axis=-1)
        return q0 + complex(gamma) * q1

    def d_lambda(self, gamma: complex, lam):
        """``dp/dlambda`` via logarithmic derivatives of the two products."""
        lam = np.asarray(lam, dtype=np.complex128)
        return _dprod(self.alphas, lam) + complex(gamma) * _dprod(self.deltas, lam)

    def d_gamma(self, lam):
        lam = np.asarray(lam, dtype=np.complex128)
        return np.prod(self.deltas - lam[..., None], axis=-1)

    def lambda_derivative(self, gamma: complex, lam: complex) -> complex:
        """``dlambda/dgamma = -p1 / dp/dlambda`` along a simple root."""
        den = complex(self.d_lambda(gamma, lam))
        if den == 0:
            raise ZeroDenominator(f"dp/dlambda vanishes at ({gamma}, {lam})")
        return -complex(self.d_gamma(lam)) / den

    def roots(self, gamma: complex) -> np.ndarray:
        return poly_roots(self.coefficients(gamma))

    def interlaces(self, *, strict: bool = True) -> bool:
        a, d = self.alphas, self.deltas
        if strict:
            return bool(np.all(a[:-1] < d) and np.all(d < a[1:]))
        return bool(np.all(a[:-1] <= d) and np.all(d <= a[1:]))


def _dprod(roots: np.ndarray, lam: np.ndarray):
    """Derivative of ``prod(r_k - lambda)`` in lambda."""
    n = roots.size
    if n == 0:
        return np.zeros_like(lam)
    diff = roots - lam[..., None]
    out = np.zeros(lam.shape, dtype=np.complex128)
    for k in range(n):
        others = np.delete(diff, k, axis=-1)
        out -= np.prod(others, axis=-1)
    return out


def _signed_char(a: np.ndarray, eigs: np.ndarray) -> np.ndarray:
    """Coefficients of ``det(a - lambda)``, highest first."""
    n = a.shape[0]
    if n == 0:
        return np.array([1.0])
    c = char_poly(a) if n <= FADDEEV_MAX_N else poly_from_roots(eigs)
    return ((-1) ** n * np.real(c)).astype(float)


def secular_pair(a, e) -> SecularPair:
    """``p0`` and ``p1`` for ``A + gamma <., e> e`` with unit ``e``."""
    a = as_matrix(a, name="A")
    if not is_hermitian(a):
        raise NotHermitian("A must be Hermitian")
    e = np.asarray(e, dtype=np.complex128).ravel()
    if e.size != a.shape[0]:
        raise DimensionMismatch(f"e has length {e.size}, A is {a.shape}")
    if abs(np.linalg.norm(e) - 1.0) > UNIT_TOL:
        raise NotUnitVector(f"||e|| = {np.linalg.norm(e):.15g}")
    v = complete_basis(e)[:, 1:]
    at = truncate(a, v)
    at = 0.5 * (at + at.conj().T)
    alphas = hermitian_eig(a).eigenvalues
    deltas = hermitian_eig(at).eigenvalues if at.size else np.zeros(0)
    return SecularPair(_signed_char(a, alphas), _signed_char(at, deltas), alphas, deltas)


def relative_determinant(a, b, gamma: complex, lam: complex, *, rtol: float = 1e-12) -> complex:
    """``det((I + gamma (A - lambda)^-1 B)#)`` truncated to ``Ran(B^*)``.

    Equals ``det(A + gamma B - lambda) / det(A - lambda)``.
    """
    a = as_matrix(a, name="A")
    b = as_matrix(b, name="B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"A is {a.shape} but B is {b.shape}")
    lam = complex(lam)
    gamma = complex(gamma)
    n = a.shape[0]
    spec = hermitian_eig(a).eigenvalues if is_hermitian(a) else np.linalg.eigvals(a)
    scale = max(1.0, float(np.max(np.abs(spec))))
    if np.min(np.abs(spec - lam)) <= POLE_RTOL * scale:
        raise SpectrumCollision(f"lambda = {lam} lies on Spec(A)")
    if gamma == 0:
        return 1.0 + 0.0j
    w = range_basis(b.conj().T, rtol)
    if w.shape[1] == 0:
        return 1.0 + 0.0j
    y = np.linalg.solve(a - lam * np.eye(n), b @ w)
    core = np.eye(w.shape[1]) + gamma * (w.conj().T @ y)
    return complex(np.linalg.det(core))


def rank_one_relative_determinant(mu: HerglotzFunction, gamma: complex, lam: complex) -> complex:
    """``1 + gamma m(lambda)`` for ``B = <., e> e``."""
    return 1.0 + complex(gamma) * mu(lam)

