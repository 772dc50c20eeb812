import math

import numpy as np
import pytest

from perturbatrix import Problem


@pytest.fixture
def two_by_two():
    e = np.array([math.sqrt(3) / 2, 0.5])
    return Problem.rank_one(np.diag([1.0, -1.0]), e)


@pytest.fixture
def five():
    return Problem.rank_one(np.diag(np.arange(1.0, 6.0)), np.full(5, 5 ** -0.5))


@pytest.fixture
def rank_two():
    e1 = np.full(5, 2.0)
    e2 = np.array([3.0, 3.0, -2.0, -2.0, -2.0])
    return Problem.from_vectors(np.diag(np.arange(1.0, 6.0)), [e1, e2])


def random_hermitian(rng, n, scale=1.0):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (z + z.conj().T)


def random_sectorial(rng, n, rank, sigma1=0.0, sigma2=0.0):
    """``X^1/2 (I + iE) X^1/2`` on a random rank-``rank`` subspace with ``-tan s1 <= E <= tan s2``."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    w = q[:, :rank]
    x_half = np.diag(np.sqrt(rng.uniform(0.5, 2.0, rank)))
    u, _ = np.linalg.qr(rng.normal(size=(rank, rank)) + 1j * rng.normal(size=(rank, rank)))
    lo, hi = -math.tan(sigma1), math.tan(sigma2)
    ev = rng.uniform(lo, hi, rank) if hi > lo else np.zeros(rank)
    e = u @ np.diag(ev) @ u.conj().T
    inner = x_half @ (np.eye(rank) + 1j * e) @ x_half
    return w @ inner @ w.conj().T


def random_unit(rng, n, complex_=True):
    v = rng.normal(size=n) + (1j * rng.normal(size=n) if complex_ else 0)
    return v / np.linalg.norm(v)


def two_cluster(m1=5, m2=25, gap=4.0):
    """Diagonal ``A`` with spectrum in ``[0,1] u [gap+1, gap+2]`` and half the mass on each cluster."""
    lo = np.arange(m1) / (m1 - 1)
    hi = gap + 1 + (np.arange(m2) / (m2 - 1) if m2 > 1 else np.array([0.5]))
    e = np.concatenate([np.full(m1, (2 * m1) ** -0.5), np.full(m2, (2 * m2) ** -0.5)])
    return Problem.rank_one(np.diag(np.concatenate([lo, hi])), e)


@pytest.fixture
def clusters():
    return two_cluster()
