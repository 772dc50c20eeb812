import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbatrix.errors import (
    DegenerateLeadingCoefficient,
    InvalidMatrix,
    NotHermitian,
    UnstablePolynomialPath,
)
from perturbatrix.linalg import (
    char_poly,
    complete_basis,
    general_eig,
    hermitian_eig,
    match_spectra,
    matrix_exp,
    operator_norm,
    poly_from_roots,
    poly_roots,
    psd_pinv_sqrt,
    psd_sqrt,
    spectral_distance,
)

from conftest import random_hermitian
from oracles import assignment_distance, companion_roots, jacobi_eigh, lapack_eigvals


def test_hermitian_eig_diagonal_sorts():
    es = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(es.eigenvalues, [1, 2, 3], atol=1e-15)


def test_hermitian_eig_identity():
    es = hermitian_eig(np.eye(4))
    assert np.allclose(es.eigenvalues, 1.0)
    assert np.allclose(np.abs(es.eigenvectors), np.eye(4))


@pytest.mark.parametrize("seed", range(5))
def test_hermitian_eig_matches_jacobi(seed):
    rng = np.random.default_rng(seed)
    n = 8
    a = random_hermitian(rng, n)
    es = hermitian_eig(a)
    w, _ = jacobi_eigh(a)
    tol = 1e-12 * n
    assert np.max(np.abs(es.eigenvalues - w)) <= tol * np.linalg.norm(a)
    assert np.linalg.norm(es.reconstruct() - a) <= tol * np.linalg.norm(a)
    u = es.eigenvectors
    assert np.linalg.norm(u.conj().T @ u - np.eye(n)) <= tol * n


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_general_eig_triangular_gives_diagonal():
    t = np.triu(np.arange(1, 17, dtype=complex).reshape(4, 4)) + 1j * np.eye(4)
    lam = general_eig(t).eigenvalues
    assert spectral_distance(lam, np.diag(t)) < 1e-12


def test_general_eig_double_eigenvalue_at_branch_point(two_by_two):
    gc = -1 + 1j * math.sqrt(3)
    lam = general_eig(two_by_two.a_gamma(gc)).eigenvalues
    target = -0.5 + 1j * math.sqrt(3) / 2
    assert np.all(np.abs(lam - target) < 1e-7)


def test_general_eig_rank_two_matches_companion(rank_two):
    g = np.exp(3j * np.pi / 8)
    a = rank_two.a_gamma(g)
    lam = general_eig(a).eigenvalues
    ref = companion_roots(np.poly(a))
    assert assignment_distance(lam, ref) <= 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_general_eig_residuals_and_lapack(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 13))
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    es = general_eig(a, vectors=True)
    res = np.linalg.norm(a @ es.eigenvectors - es.eigenvectors * es.eigenvalues, axis=0)
    assert np.all(res <= 1e-9 * n * np.linalg.norm(a, 2))
    assert assignment_distance(es.eigenvalues, lapack_eigvals(a)) <= 1e-9
    assert abs(es.eigenvalues.sum() - np.trace(a)) <= 1e-9 * n * np.linalg.norm(a, 2)


def test_general_eig_size_cap():
    with pytest.raises(InvalidMatrix):
        general_eig(np.zeros((513, 513)))


def test_hermitian_and_general_agree():
    rng = np.random.default_rng(7)
    a = random_hermitian(rng, 10)
    g = np.sort(general_eig(a).eigenvalues.real)
    assert np.max(np.abs(g - hermitian_eig(a).eigenvalues)) <= 1e-9


def test_poly_roots_simple_cases():
    assert spectral_distance(poly_roots([1, 0, 1]), [1j, -1j]) < 1e-14
    r = poly_roots(np.poly(np.arange(1, 6)))
    assert spectral_distance(r, np.arange(1, 6)) < 1e-10


def test_poly_roots_rejects_zero_leading():
    with pytest.raises(DegenerateLeadingCoefficient):
        poly_roots([0, 1, 2])
    with pytest.raises(DegenerateLeadingCoefficient):
        poly_roots([3])


def test_poly_roots_secular_pair_matches_eigensolver(five):
    g = 10j
    coeffs = five.secular.coefficients(g)
    r = poly_roots(coeffs)
    assert spectral_distance(r, general_eig(five.a_gamma(g)).eigenvalues) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2 ** 31))
def test_char_poly_roots_match_eigenvalues(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a /= max(1.0, np.linalg.norm(a, 2))
    c = char_poly(a)
    assert np.allclose(c, np.poly(a), atol=1e-10)
    assert spectral_distance(poly_roots(c), general_eig(a).eigenvalues) <= 1e-8 * max(1, n)


def test_char_poly_refuses_large():
    with pytest.raises(UnstablePolynomialPath):
        char_poly(np.eye(65))


def test_poly_from_roots_matches_numpy():
    r = np.array([1, 2 + 1j, -3, 0.5j])
    assert np.allclose(poly_from_roots(r), np.poly(r))


def test_matrix_exp_zero_and_scalar():
    assert np.allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))
    assert abs(matrix_exp(np.array([[1j * np.pi]]))[0, 0] + 1) < 1e-12


def test_matrix_exp_matches_eigendecomposition():
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 6)
    w, v = jacobi_eigh(a)
    ref = v @ np.diag(np.exp(1j * w)) @ v.conj().T
    assert np.linalg.norm(matrix_exp(1j * a) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_matrix_exp_is_contraction_for_dissipative_generator(two_by_two):
    g = np.exp(1j * np.radians(60))
    z = 1j * two_by_two.a_gamma(g)
    for t in (0.1, 1.0, 5.0):
        assert operator_norm(matrix_exp(z, t)) <= 1 + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31), st.floats(-2, 2), st.floats(-2, 2))
def test_matrix_exp_semigroup(seed, s, t):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a *= 2.5 / np.linalg.norm(a, 2)
    lhs = matrix_exp(a, s + t)
    rhs = matrix_exp(a, s) @ matrix_exp(a, t)
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(1.0, np.linalg.norm(lhs))


def test_operator_norm_cases():
    assert abs(operator_norm(np.diag([2.0, -3.0])) - 3) < 1e-10
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(5, 5)) + 0j)
    assert abs(operator_norm(q) - 1) < 1e-10
    e = np.ones(4) / 2
    assert abs(operator_norm(np.outer(e, e)) - 1) < 1e-10
    assert operator_norm(np.zeros((3, 3))) == 0


def test_operator_norm_against_svd():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7))
        assert abs(operator_norm(a) - np.linalg.norm(a, 2)) <= 1e-9 * np.linalg.norm(a, 2)


def test_complete_basis_is_unitary_with_e_first():
    rng = np.random.default_rng(5)
    e = rng.normal(size=6) + 1j * rng.normal(size=6)
    e /= np.linalg.norm(e)
    q = complete_basis(e)
    assert np.allclose(q.conj().T @ q, np.eye(6), atol=1e-14)
    assert np.allclose(q[:, 0], e, atol=1e-14)


def test_psd_roots():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    p = z @ z.conj().T
    s = psd_sqrt(p)
    assert np.allclose(s @ s, p, atol=1e-12)
    ps = psd_pinv_sqrt(p)
    proj = ps @ p @ ps
    assert np.allclose(proj @ proj, proj, atol=1e-10)
    assert abs(np.trace(proj).real - 3) < 1e-10


def test_match_spectra_greedy_and_hungarian():
    a = np.array([1, 2, 3])
    d, perm = match_spectra(a, [3.0, 1.0, 2.0])
    assert d == 0 and list(perm) == [1, 2, 0]
    x = np.arange(12) * (1 + 1j)
    d, perm = match_spectra(x, x[::-1] + 1e-3)
    assert d < 2e-3 and list(perm) == list(range(11, -1, -1))
