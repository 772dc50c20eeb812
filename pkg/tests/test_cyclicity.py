import cmath
import math

import numpy as np
import pytest

from perturbatrix.cyclicity import krylov_decompose, krylov_rank, verify_upper_halfplane
from perturbatrix.errors import DimensionMismatch, HypothesisViolated
from perturbatrix.linalg import matrix_exp, operator_norm

from conftest import random_hermitian, random_sectorial, random_unit


def test_uniform_vector_is_cyclic(five):
    kd = krylov_decompose(five.a, five.b)
    assert kd.cyclic and kd.dims == (1, 1, 1, 1, 1)


def test_repeated_eigenvalue_blocks_cyclicity():
    e = np.array([1.0, 0, 0])
    kd = krylov_decompose(np.diag([1.0, 1.0, 2.0]), np.outer(e, e))
    assert not kd.cyclic


def test_rank_two_cyclic_matches_stacked_rank(rank_two):
    kd = krylov_decompose(rank_two.a, rank_two.b)
    assert kd.cyclic
    assert krylov_rank(rank_two.a, rank_two.b) == 5


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        krylov_decompose(np.eye(3), np.eye(2))


@pytest.mark.parametrize("seed", range(8))
def test_layers_orthogonal_and_block_tridiagonal(seed):
    rng = np.random.default_rng(seed)
    n = 8
    a = random_hermitian(rng, n)
    b = random_sectorial(rng, n, int(rng.integers(1, 3)), 0.3, 0.3)
    kd = krylov_decompose(a, b)
    q = kd.basis
    assert np.linalg.norm(q.conj().T @ q - np.eye(q.shape[1])) <= 1e-10
    assert kd.cyclic == (sum(kd.dims) == n)
    na = operator_norm(a)
    k = len(kd.dims)
    for i in range(k):
        for j in range(k):
            if abs(i - j) >= 2:
                assert operator_norm(kd.block(i, j)) <= 1e-10 * na
    assert kd.cyclic == (krylov_rank(a, b) == n)


def _non_cyclic_pair(rng):
    # A block diagonal, B supported in the first block
    a = np.zeros((6, 6), dtype=complex)
    a[:3, :3] = random_hermitian(rng, 3)
    a[3:, 3:] = random_hermitian(rng, 3)
    b = np.zeros((6, 6), dtype=complex)
    e = random_unit(rng, 3)
    b[:3, :3] = np.outer(e, e.conj())
    return a, b


@pytest.mark.parametrize("seed", range(4))
def test_non_cyclic_exponential_and_resolvent_criteria(seed):
    rng = np.random.default_rng(seed)
    a, b = _non_cyclic_pair(rng)
    kd = krylov_decompose(a, b)
    assert not kd.cyclic
    x = kd.complement_projection()
    assert operator_norm(x) > 0.5
    for t in (0, 0.5, -0.5, 1, -1, 2, -2):
        assert operator_norm(x @ matrix_exp(1j * a, t) @ b) <= 1e-8
    w = np.linalg.eigvalsh(a)
    for _ in range(5):
        z = complex(rng.normal(), rng.normal())
        if np.min(np.abs(w - z)) < 1e-3:
            continue
        r = np.linalg.solve(z * np.eye(6) - a, b)
        assert operator_norm(x @ r) <= 1e-8


def test_rank_two_upper_halfplane(rank_two):
    rep = verify_upper_halfplane(rank_two.a, rank_two.b, 1j)
    assert rep.passed and rep.min_imag > 0 and rep.eigenvalues.size == 5
    assert np.all(rep.geometric_multiplicities <= 2)


def test_zero_coupling_rejected(rank_two):
    with pytest.raises(HypothesisViolated):
        verify_upper_halfplane(rank_two.a, rank_two.b, 0)


def test_outside_sector_rejected(five):
    with pytest.raises(HypothesisViolated):
        verify_upper_halfplane(five.a, five.b, -1j)


def test_non_cyclic_rejected():
    a, b = _non_cyclic_pair(np.random.default_rng(1))
    with pytest.raises(HypothesisViolated):
        verify_upper_halfplane(a, b, 1j)


@pytest.mark.parametrize("seed", range(6))
def test_rank_one_geometric_multiplicity_is_one(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 6)
    e = random_unit(rng, 6)
    g = rng.uniform(0.2, 3) * cmath.exp(1j * rng.uniform(0.1, math.pi - 0.1))
    rep = verify_upper_halfplane(a, np.outer(e, e.conj()), g)
    assert rep.passed and np.all(rep.geometric_multiplicities == 1)


@pytest.mark.parametrize("seed", range(4))
def test_contraction_decay(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 5)
    b = random_sectorial(rng, 5, 2, 0.3, 0.4)
    g = 1.5 * cmath.exp(1j * math.pi / 2)
    rep = verify_upper_halfplane(a, b, g)
    assert rep.passed
    z = 1j * (a + g * b)
    c = rep.min_imag - 1e-10
    lam, v = np.linalg.eig(a + g * b)
    m = np.linalg.cond(v)
    for t in np.linspace(0.1, 10, 12):
        nrm = operator_norm(matrix_exp(z, t))
        assert nrm <= 1 + 1e-10
        assert nrm <= m * math.exp(-c * t) * (1 + 1e-8)
