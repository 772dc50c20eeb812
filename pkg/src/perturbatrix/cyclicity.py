"""Block Krylov cyclicity test and the upper half-plane check for ``A + gamma B``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, HypothesisViolated, NotHermitian
from .linalg import (
    as_matrix,
    general_eig,
    is_hermitian,
    operator_norm,
    range_basis,
)
from .sectorial import analyze_sectorial, coupling_sector

ACCEPT_RTOL = 1e-10


@dataclass(frozen=True)
class KrylovDecomposition:
    """Orthonormal bases of ``R_0, R_1, ...`` and ``A`` in their joint basis."""

    subspaces: list
    cyclic: bool
    tridiagonal_blocks: np.ndarray
    n: int

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.shape[1] for s in self.subspaces)

    @property
    def basis(self) -> np.ndarray:
        if not self.subspaces:
            return np.zeros((self.n, 0), dtype=np.complex128)
        return np.hstack(self.subspaces)

    def block(self, i: int, j: int) -> np.ndarray:
        off = np.concatenate([[0], np.cumsum(self.dims)])
        return self.tridiagonal_blocks[off[i]:off[i + 1], off[j]:off[j + 1]]

    def complement_projection(self) -> np.ndarray:
        """Orthogonal projection onto the complement of the Krylov span."""
        q = self.basis
        return np.eye(self.n, dtype=np.complex128) - q @ q.conj().T


def _orthogonalize(w: np.ndarray, q: np.ndarray, accept_rtol: float) -> np.ndarray:
    """Modified Gram-Schmidt (two passes) of the columns of ``w`` against ``q``."""
    kept = []
    for col in w.T:
        v = col.copy()
        incoming = np.linalg.norm(v)
        if incoming == 0.0:
            continue
        for _ in range(2):
            for basis in (q, *kept):
                if basis.ndim == 1:
                    v -= basis * (basis.conj() @ v)
                else:
                    for k in range(basis.shape[1]):
                        v -= basis[:, k] * (basis[:, k].conj() @ v)
        nv = np.linalg.norm(v)
        if nv > accept_rtol * incoming:
            kept.append(v / nv)
    if not kept:
        return np.zeros((w.shape[0], 0), dtype=np.complex128)
    return np.column_stack(kept)


def krylov_decompose(a, b, *, rank_rtol: float = 1e-12,
                     accept_rtol: float = ACCEPT_RTOL) -> KrylovDecomposition:
    """Split ``H`` into the orthogonal layers ``R_m`` generated by ``A`` from ``Ran(B)``.

    ``R_0`` is an orthonormal basis of ``Ran(B)``; ``R_m`` is the part of
    ``A R_{m-1}`` orthogonal to all earlier layers.  ``B`` is cyclic for ``A``
    when the layers exhaust the space.
    """
    a = as_matrix(a, name="A")
    b = as_matrix(b, name="B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"A is {a.shape} but B is {b.shape}")
    if not is_hermitian(a):
        raise NotHermitian("A must be Hermitian")
    n = a.shape[0]
    layers = []
    r0 = range_basis(b, rank_rtol)
    current = _orthogonalize(r0, np.zeros((n, 0), dtype=np.complex128), accept_rtol)
    total = 0
    while current.shape[1] and total < n:
        layers.append(current)
        total += current.shape[1]
        q = np.hstack(layers)
        current = _orthogonalize(a @ current, q, accept_rtol)
    q = np.hstack(layers) if layers else np.zeros((n, 0), dtype=np.complex128)
    t = q.conj().T @ a @ q
    return KrylovDecomposition(subspaces=layers, cyclic=(total == n), tridiagonal_blocks=t, n=n)


def krylov_rank(a, b, *, rtol: float = 1e-10) -> int:
    """Numerical rank of ``[B, AB, ..., A^{N-1} B]`` with column normalization."""
    a = as_matrix(a)
    b = as_matrix(b)
    n = a.shape[0]
    blocks = []
    cur = b
    for _ in range(n):
        blocks.append(cur)
        cur = a @ cur
    k = np.hstack(blocks)
    norms = np.linalg.norm(k, axis=0)
    k = k[:, norms > 0] / norms[norms > 0]
    if k.shape[1] == 0:
        return 0
    s = np.linalg.svd(k, compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class HalfPlaneReport:
    gamma: complex
    eigenvalues: np.ndarray
    min_imag: float
    geometric_multiplicities: np.ndarray
    rank: int
    passed: bool
    notes: list = field(default_factory=list)


def geometric_multiplicity(m: np.ndarray, lam: complex, rtol: float = 1e-8) -> int:
    """Dimension of the numerical null space of ``m - lam I``."""
    n = m.shape[0]
    s = np.linalg.svd(m - lam * np.eye(n), compute_uv=False)
    return int(np.sum(s <= rtol * max(operator_norm(m), 1e-300)))


def verify_upper_halfplane(a, b, gamma: complex) -> HalfPlaneReport:
    """Check that ``Spec(A + gamma B)`` lies in the open upper half-plane.

    Requires ``B`` sectorial and cyclic for ``A`` and ``0 != gamma`` in the
    coupling sector.  Each eigenvalue's geometric multiplicity must not
    exceed ``rank(B)``.
    """
    a = as_matrix(a, name="A")
    b = as_matrix(b, name="B")
    gamma = complex(gamma)
    if gamma == 0:
        raise HypothesisViolated("gamma = 0 leaves the spectrum on the real axis")
    dec = analyze_sectorial(b)
    sector = coupling_sector(dec)
    if not sector.contains(gamma):
        raise HypothesisViolated(f"gamma = {gamma} lies outside the coupling sector")
    kd = krylov_decompose(a, b)
    if not kd.cyclic:
        raise HypothesisViolated(f"B is not cyclic for A (Krylov dims {kd.dims})")
    ag = a + gamma * b
    lam = general_eig(ag).eigenvalues
    mult = np.array([geometric_multiplicity(ag, z) for z in lam])
    rank = dec.rank
    min_imag = float(np.min(lam.imag))
    passed = bool(min_imag > 0.0 and np.all(mult <= rank))
    return HalfPlaneReport(gamma, lam, min_imag, mult, rank, passed)
