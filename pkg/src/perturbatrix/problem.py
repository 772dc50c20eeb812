"""A perturbation problem ``A + gamma B`` with its cached spectral data."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .cyclicity import krylov_decompose
from .errors import DimensionMismatch, HypothesisError, NotHermitian, NotUnitVector
from .herglotz import secular_pair
from .linalg import (
    as_matrix,
    general_eig,
    hermitian_eig,
    is_hermitian,
    operator_norm,
    truncate,
)
from .sectorial import analyze_sectorial, coupling_sector

GAP_RTOL = 1e-10


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    witness: object = None

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class HypothesisReport:
    checks: list = field(default_factory=list)
    sigma1: float = 0.0
    sigma2: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "checks": [c.as_dict() for c in self.checks],
        }


def _min_gap(values: np.ndarray) -> float:
    v = np.asarray(values)
    if v.size < 2:
        return np.inf
    d = np.abs(v[:, None] - v[None, :])
    d[np.diag_indices(v.size)] = np.inf
    return float(d.min())


def order_betas(betas) -> np.ndarray:
    """Ascending modulus, ties broken by ascending argument."""
    b = np.asarray(betas, dtype=np.complex128)
    key_mod = np.round(np.abs(b), 12)
    order = np.lexsort((np.angle(b), key_mod))
    return b[order]


class Problem:
    """``A`` Hermitian, ``B`` sectorial, both ``N x N``.

    Spectral quantities are computed lazily and cached:

    * ``alphas``: eigenvalues of ``A``, ascending;
    * ``betas``: nonzero eigenvalues of ``B``, ordered by modulus then argument;
    * ``deltas``: eigenvalues of ``A`` compressed to ``Ker(B)``, ascending.
    """

    def __init__(self, a, b, *, sigma1: float | None = None, sigma2: float | None = None):
        a = as_matrix(a, name="A")
        b = as_matrix(b, name="B")
        if a.shape != b.shape:
            raise DimensionMismatch(f"A is {a.shape} but B is {b.shape}")
        if not is_hermitian(a):
            raise NotHermitian("A must be Hermitian")
        self.a = 0.5 * (a + a.conj().T)
        self.b = b
        self._declared = (sigma1, sigma2)

    @classmethod
    def rank_one(cls, a, e, scale: complex = 1.0) -> "Problem":
        """``B = scale <., e> e`` with unit ``e``."""
        e = np.asarray(e, dtype=np.complex128).ravel()
        if abs(np.linalg.norm(e) - 1.0) > 1e-10:
            raise NotUnitVector(f"||e|| = {np.linalg.norm(e):.15g}")
        return cls(a, complex(scale) * np.outer(e, e.conj()))

    @classmethod
    def from_vectors(cls, a, vectors) -> "Problem":
        """``B = sum_i <., e_i> e_i`` (vectors need not be normalized)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.complex128))
        return cls(a, v.T @ v.conj())

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @cached_property
    def eig(self):
        return hermitian_eig(self.a)

    @property
    def alphas(self) -> np.ndarray:
        return self.eig.eigenvalues

    @cached_property
    def sectorial(self):
        return analyze_sectorial(self.b)

    @cached_property
    def sector(self):
        return coupling_sector(self.sectorial, *self._declared)

    @property
    def rank(self) -> int:
        return self.sectorial.rank

    @cached_property
    def norm_a(self) -> float:
        return operator_norm(self.a)

    @cached_property
    def norm_b(self) -> float:
        return self.sectorial.norm

    @cached_property
    def b_truncated(self) -> np.ndarray:
        return truncate(self.b, self.sectorial.complement_basis)

    @cached_property
    def betas(self) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(0, dtype=np.complex128)
        return order_betas(general_eig(self.b_truncated).eigenvalues)

    @cached_property
    def deltas(self) -> np.ndarray:
        k = self.sectorial.kernel_basis
        if k.shape[1] == 0:
            return np.zeros(0)
        at = truncate(self.a, k)
        return hermitian_eig(0.5 * (at + at.conj().T)).eigenvalues

    @cached_property
    def rank_one_data(self):
        """``(e, c)`` with ``B = c <., e> e`` when ``rank(B) == 1``, else ``None``."""
        if self.rank != 1:
            return None
        e = self.sectorial.complement_basis[:, 0]
        return e, complex(e.conj() @ self.b @ e)

    @cached_property
    def weights(self) -> np.ndarray:
        """``|<e, u_r>|^2`` for rank-one ``B``."""
        e = self.rank_one_data[0]
        return np.abs(self.eig.eigenvectors.conj().T @ e) ** 2

    @cached_property
    def secular(self):
        data = self.rank_one_data
        return None if data is None else secular_pair(self.a, data[0])

    @cached_property
    def krylov(self):
        return krylov_decompose(self.a, self.b)

    def a_gamma(self, gamma: complex) -> np.ndarray:
        return self.a + complex(gamma) * self.b

    def spectrum(self, gamma: complex) -> np.ndarray:
        return general_eig(self.a_gamma(gamma)).eigenvalues

    def scale(self, t: float = 0.0) -> float:
        return max(self.norm_a + abs(t) * self.norm_b, 1e-300)

    # -- characteristic function ------------------------------------------

    def _scaled_pair(self, gamma: complex, lams: np.ndarray):
        """Rank-one ``p0``, ``gamma c p1`` with a common scale, and their log-derivatives."""
        gc = complex(gamma) * self.rank_one_data[1]
        log_gc = cmath.log(gc) if gc != 0 else complex(math.nan, 0.0)
        return _kernels.rank_one_scaled_pair(self._alphas_c, self._deltas_c,
                                             np.ascontiguousarray(lams, dtype=np.complex128), log_gc)

    @cached_property
    def _alphas_c(self) -> np.ndarray:
        return np.ascontiguousarray(self.alphas, dtype=np.complex128)

    @cached_property
    def _deltas_c(self) -> np.ndarray:
        return np.ascontiguousarray(self.deltas, dtype=np.complex128)

    def newton_steps(self, gamma: complex, lams) -> np.ndarray:
        """Newton increments for ``lambda -> det(A_gamma - lambda)`` at each entry of ``lams``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
        if self.rank_one_data is not None:
            p0, p1, s0, s1 = self._scaled_pair(gamma, lams)
            return -(p0 + p1) / (p0 * s0 + p1 * s1)
        eye = np.eye(self.n)
        m = self.a_gamma(gamma)[None, :, :] - lams[:, None, None] * eye
        try:
            tr = np.trace(np.linalg.inv(m), axis1=1, axis2=2)
        except np.linalg.LinAlgError:
            tr = np.empty(lams.size, dtype=np.complex128)
            for k in range(lams.size):
                try:
                    tr[k] = np.trace(np.linalg.inv(m[k]))
                except np.linalg.LinAlgError:
                    tr[k] = np.inf  # lambda is an exact eigenvalue: zero increment
        return 1.0 / tr

    def dlambda_dgamma(self, gamma: complex, lams) -> np.ndarray:
        """Derivative of simple eigenvalues along the coupling, ``<Bv, w> / <v, w>``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
        gamma = complex(gamma)
        if self.rank_one_data is not None and gamma != 0:
            p0, p1, s0, s1 = self._scaled_pair(gamma, lams)
            return -(p1 / gamma) / (p0 * s0 + p1 * s1)
        eye = np.eye(self.n)
        m = self.a_gamma(gamma)[None, :, :] - lams[:, None, None] * eye
        u, _, vh = np.linalg.svd(m)
        v = vh[:, -1, :].conj()
        w = u[:, :, -1]
        num = np.einsum("ki,ij,kj->k", w.conj(), self.b, v)
        den = np.einsum("ki,ki->k", w.conj(), v)
        return num / den

    def relative_det(self, gamma: complex, lam: complex, *, derivative: bool = False):
        """``det(C)`` with ``C = I + gamma W^* (A - lambda)^-1 B W`` on ``W = Ker(B)^perp``.

        With ``derivative=True`` also returns ``d det(C) / d lambda`` by
        column-replacement determinants, which stay finite where ``C`` is singular.
        """
        w = self.sectorial.complement_basis
        gamma = complex(gamma)
        r = self.a - complex(lam) * np.eye(self.n)
        y = np.linalg.solve(r, self.b @ w)
        c = np.eye(w.shape[1]) + gamma * (w.conj().T @ y)
        det = complex(np.linalg.det(c))
        if not derivative:
            return det
        dc = gamma * (w.conj().T @ np.linalg.solve(r, y))
        ddet = 0.0j
        for k in range(c.shape[1]):
            ck = c.copy()
            ck[:, k] = dc[:, k]
            ddet += np.linalg.det(ck)
        return det, complex(ddet)

    # -- hypotheses --------------------------------------------------------

    def hypotheses(self) -> HypothesisReport:
        checks = []
        try:
            dec = self.sectorial
            sec = self.sector
            checks.append(HypothesisCheck(
                "H1", True, f"A Hermitian, B sectorial with constants ({dec.sigma1:.6g}, {dec.sigma2:.6g})"))
        except HypothesisError as exc:
            checks.append(HypothesisCheck("H1", False, str(exc)))
            return HypothesisReport(checks)
        kd = self.krylov
        checks.append(HypothesisCheck(
            "H2", kd.cyclic, f"Krylov layer dimensions {list(kd.dims)} (N = {self.n})", list(kd.dims)))
        tol_a = GAP_RTOL * max(self.norm_a, 1.0)
        gap = _min_gap(self.alphas)
        checks.append(HypothesisCheck("H3", gap > tol_a, f"min eigenvalue gap of A {gap:.6g}", gap))
        tol_b = GAP_RTOL * max(self.norm_b, 1.0)
        gap = _min_gap(self.betas)
        checks.append(HypothesisCheck("H4", gap > tol_b, f"min gap of nonzero eigenvalues of B {gap:.6g}", gap))
        gap = _min_gap(self.deltas)
        checks.append(HypothesisCheck(
            "H5", gap > tol_a, f"min eigenvalue gap of A on Ker(B) {gap:.6g}", gap))
        checks.append(HypothesisCheck(
            "cyclicity", kd.cyclic, "B is cyclic for A" if kd.cyclic else "Krylov span is a proper subspace"))
        return HypothesisReport(checks, sec.sigma1, sec.sigma2)
