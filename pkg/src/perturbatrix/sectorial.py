"""Sectorial perturbations: kernel splitting, sector constants, coupling sector."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotInCone, NotSectorial
from .linalg import as_matrix, hermitian_eig, operator_norm, truncate

KERNEL_RTOL = 1e-12
ANGLE_TOL = 1e-10


@dataclass(frozen=True)
class SectorialDecomposition:
    """Splitting ``H = Ker(B) + Ker(B)^perp`` with ``B# = X^1/2 (I + iE) X^1/2``.

    ``X`` and ``E`` are expressed in the orthonormal basis
    ``complement_basis`` of ``Ker(B)^perp``; ``X`` is diagonal and positive.
    """

    sigma1: float
    sigma2: float
    kernel_basis: np.ndarray
    complement_basis: np.ndarray
    X: np.ndarray
    E: np.ndarray
    norm: float

    @property
    def rank(self) -> int:
        return self.complement_basis.shape[1]

    @property
    def n(self) -> int:
        return self.complement_basis.shape[0]

    def truncated(self) -> np.ndarray:
        """``X^1/2 (I + iE) X^1/2`` on ``Ker(B)^perp``."""
        xh = np.sqrt(np.real(np.diag(self.X)))
        m = np.eye(self.rank) + 1j * self.E
        return xh[:, None] * m * xh[None, :]


@dataclass(frozen=True)
class CouplingSector:
    """Couplings ``gamma`` with ``Im(gamma <Bf, f>) >= 0`` for all ``f``."""

    sigma1: float
    sigma2: float

    @property
    def lower(self) -> float:
        return self.sigma1

    @property
    def upper(self) -> float:
        return math.pi - self.sigma2

    def contains(self, gamma: complex) -> bool:
        gamma = complex(gamma)
        if gamma == 0:
            return True
        arg = cmath.phase(gamma)
        return self.sigma1 < arg < math.pi - self.sigma2

    def __contains__(self, gamma) -> bool:
        return self.contains(gamma)

    def angle_inside(self, theta: float) -> bool:
        return self.sigma1 < theta < math.pi - self.sigma2


def analyze_sectorial(b, *, rtol: float = KERNEL_RTOL) -> SectorialDecomposition:
    """Decompose ``B`` and compute its minimal sectorial constants.

    The kernel is the eigenspace of ``D0 = (B + B^*)/2`` for eigenvalues at
    most ``rtol * ||B||``.  ``E = X^-1/2 D1 X^-1/2`` with ``D1 = (B - B^*)/2i``.

    Raises ``NotSectorial`` if ``D0`` has an eigenvalue below
    ``-rtol * ||B||`` or if ``D1`` does not vanish on ``Ker(D0)``.
    """
    b = as_matrix(b, name="B")
    n = b.shape[0]
    nrm = operator_norm(b)
    if nrm == 0.0:
        empty = np.zeros((0, 0), dtype=np.complex128)
        return SectorialDecomposition(0.0, 0.0, np.eye(n, dtype=np.complex128),
                                      np.zeros((n, 0), dtype=np.complex128), empty, empty, 0.0)
    d0 = 0.5 * (b + b.conj().T)
    d1 = (b - b.conj().T) / 2j
    es = hermitian_eig(d0)
    thr = rtol * nrm
    if es.eigenvalues[0] < -thr:
        raise NotSectorial(
            f"Re<Bf,f> takes negative values (min eigenvalue {es.eigenvalues[0]:.3e})")
    pos = es.eigenvalues > thr
    kernel = es.eigenvectors[:, ~pos]
    comp = es.eigenvectors[:, pos]
    if kernel.shape[1]:
        leak = operator_norm(d1 @ kernel)
        if leak > 1e-10 * nrm:
            raise NotSectorial(
                f"Ker(B+B*) is not contained in Ker(B-B*) (leak {leak:.3e}): numerical range "
                "touches the imaginary axis away from 0")
    xdiag = es.eigenvalues[pos]
    inv_sqrt = 1.0 / np.sqrt(xdiag)
    d1t = truncate(d1, comp)
    e = inv_sqrt[:, None] * d1t * inv_sqrt[None, :]
    e = 0.5 * (e + e.conj().T)
    if comp.shape[1]:
        ee = hermitian_eig(e).eigenvalues
        sigma2 = max(0.0, math.atan(ee[-1]))
        sigma1 = max(0.0, math.atan(-ee[0]))
    else:
        sigma1 = sigma2 = 0.0
    return SectorialDecomposition(
        sigma1=sigma1,
        sigma2=sigma2,
        kernel_basis=kernel,
        complement_basis=comp,
        X=np.diag(xdiag).astype(np.complex128),
        E=e,
        norm=nrm,
    )


def coupling_sector(dec: SectorialDecomposition, sigma1: float | None = None,
                    sigma2: float | None = None) -> CouplingSector:
    """The admissible couplings ``{0} u {sigma1 < arg(gamma) < pi - sigma2}``.

    Looser user-declared constants may be passed; tighter ones than the
    minimal constants of ``dec`` are rejected.
    """
    s1 = dec.sigma1 if sigma1 is None else float(sigma1)
    s2 = dec.sigma2 if sigma2 is None else float(sigma2)
    if s1 < dec.sigma1 - ANGLE_TOL or s2 < dec.sigma2 - ANGLE_TOL:
        raise NotInCone(
            f"declared constants ({s1:.6g}, {s2:.6g}) are tighter than the minimal "
            f"({dec.sigma1:.6g}, {dec.sigma2:.6g})")
    if not (0.0 <= s1 < math.pi / 2 and 0.0 <= s2 < math.pi / 2):
        raise NotInCone("sectorial constants must lie in [0, pi/2)")
    return CouplingSector(s1, s2)


def is_extreme_ray(b, sigma1: float, sigma2: float, *, angle_tol: float = ANGLE_TOL) -> bool:
    """Whether ``B`` spans an extreme ray of the cone ``C(sigma1, sigma2)``.

    True exactly when ``B = alpha <., e> e`` with ``arg(alpha)`` equal to
    ``-sigma1`` or ``sigma2``.
    """
    dec = analyze_sectorial(b)
    if dec.sigma1 > sigma1 + angle_tol or dec.sigma2 > sigma2 + angle_tol:
        raise NotInCone(
            f"B needs constants ({dec.sigma1:.6g}, {dec.sigma2:.6g}), "
            f"outside ({sigma1:.6g}, {sigma2:.6g})")
    if dec.rank != 1:
        return False
    e = dec.complement_basis[:, 0]
    alpha = complex(e.conj() @ as_matrix(b) @ e)
    arg = cmath.phase(alpha)
    return abs(arg + sigma1) <= angle_tol or abs(arg - sigma2) <= angle_tol


def check_zero_equivalence(b, s, *, rtol: float = KERNEL_RTOL) -> tuple[bool, bool, bool]:
    """Report ``(S B S^* = 0, S B = 0, S B^* = 0)`` for sectorial ``B``."""
    b = as_matrix(b, name="B")
    s = as_matrix(s, square=False, name="S")
    analyze_sectorial(b)
    nb = operator_norm(b)
    ns = operator_norm(s)
    thr = rtol * ns * ns * nb
    return (
        operator_norm(s @ b @ s.conj().T) <= thr,
        operator_norm(s @ b) <= thr,
        operator_norm(s @ b.conj().T) <= thr,
    )
