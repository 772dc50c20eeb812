import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbatrix.errors import NotHermitian, NotInUpperHalfPlane, NotPSD, NotUnitVector, PoleProximity
from perturbatrix.herglotz import (
    HerglotzFunction,
    SpectralMeasure,
    build_measure,
    couplings_at,
    eval_m,
    gamma_of_lambda,
    rank_one_measure,
    relative_determinant,
    secular_pair,
)

from conftest import random_hermitian, random_sectorial, random_unit
from oracles import NEQ5_DELTAS, companion_roots, det_ratio, resolvent_form, two_by_two_eigs


def test_uniform_vector_measure(five):
    mu = build_measure(five.a, five.b)
    assert mu.is_scalar
    assert np.allclose(mu.locations, np.arange(1, 6))
    assert np.allclose(mu.weights[:, 0, 0], 0.2)


def test_identity_measure_total_mass():
    rng = np.random.default_rng(0)
    a = random_hermitian(rng, 4)
    mu = build_measure(a, np.eye(4))
    assert mu.dimension == 4
    assert np.allclose(mu.total_mass(), np.eye(4), atol=1e-12)


def test_two_cluster_measure(clusters):
    mu = build_measure(clusters.a, clusters.b)
    assert mu.size == 30
    assert abs(mu.mass_on(0, 1)[0, 0] - 0.5) < 1e-12
    assert abs(mu.mass_on(5, 6)[0, 0] - 0.5) < 1e-12


def test_build_measure_rejects_non_psd():
    with pytest.raises(NotPSD):
        build_measure(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(NotPSD):
        build_measure(np.eye(2), np.array([[1, 1], [0, 1.0]]))


@pytest.mark.parametrize("seed", range(6))
def test_measure_atoms_psd_and_total_mass(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 6)
    a[0, 0] = a[1, 1] = 0.0
    a[0, 1] = a[1, 0] = 0.0
    b = random_sectorial(rng, 6, 3)
    mu = build_measure(a, b)
    for q in mu.weights:
        assert np.linalg.eigvalsh(q).min() >= -1e-12 * max(np.linalg.norm(q, 2), 1e-300)
    w = mu.basis
    assert np.linalg.norm(mu.total_mass() - w.conj().T @ b @ w) <= 1e-10 * np.linalg.norm(b, 2)
    assert np.all(np.diff(mu.locations) > 0)


def test_single_atom_values():
    h = HerglotzFunction(SpectralMeasure.scalar([0.0], [1.0]))
    assert abs(eval_m(h, 1j) - 1j) < 1e-15
    assert abs(gamma_of_lambda(h, 1j) - 1j) < 1e-15


def test_uniform_grid_definition():
    n = 100
    s = np.arange(1, n + 1) / n
    h = HerglotzFunction(SpectralMeasure.scalar(s, np.full(n, 1 / n)))
    lam = 0.5 + 0.1j
    assert abs(h(lam) - np.mean(1 / (s - lam))) < 1e-14


def test_scalar_m_matches_resolvent(five):
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    lam = 3 + 1j
    assert abs(h(lam) - resolvent_form(five.a, five.rank_one_data[0], lam)) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_matrix_m_matches_resolvent(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 6)
    z = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    b = z @ z.conj().T
    mu = build_measure(a, b)
    h = HerglotzFunction(mu)
    w = mu.basis
    bw = np.linalg.eigh(b)
    root = bw[1] @ np.diag(np.sqrt(np.clip(bw[0], 0, None))) @ bw[1].conj().T
    lam = complex(rng.normal(), abs(rng.normal()) + 0.1)
    ref = w.conj().T @ root @ np.linalg.solve(a - lam * np.eye(6), root) @ w
    assert np.linalg.norm(h(lam) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_pole_proximity(five):
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    with pytest.raises(PoleProximity):
        h(2.0)


def test_herglotz_positivity_and_bound():
    rng = np.random.default_rng(21)
    a = random_hermitian(rng, 5)
    z = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    h = HerglotzFunction(build_measure(a, z @ z.conj().T))
    e = random_unit(rng, 5)
    hs = HerglotzFunction(rank_one_measure(a, e))
    for _ in range(1000):
        lam = complex(rng.normal() * 3, rng.exponential())
        f = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert (f.conj() @ h(lam) @ f).imag > -1e-12
        x = complex(lam.real, -lam.imag if rng.uniform() < 0.5 else lam.imag)
        assert abs(hs(x)) < 1 / abs(x.imag) + 1e-12


def test_two_by_two_secular_pair():
    alpha, beta = math.sqrt(3) / 2, 0.5
    sp = secular_pair(np.diag([1.0, -1.0]), [alpha, beta])
    assert np.allclose(sp.p0, [1, 0, -1], atol=1e-14)
    assert np.allclose(sp.p1, [-1, -0.5], atol=1e-14)
    for g in (0.3 + 1j, 2j, -1 + 0.5j):
        assert spectral_distance_sorted(sp.roots(g), two_by_two_eigs(g)) < 1e-12


def spectral_distance_sorted(x, y):
    return max(min(abs(a - b) for b in y) for a in x)


def test_coordinate_vector_deletes_row():
    a = np.diag([2.0, 5.0, 7.0])
    sp = secular_pair(a, [1.0, 0, 0])
    assert np.allclose(sp.p1, np.poly([5.0, 7.0]))
    assert np.allclose(sp.deltas, [5, 7])


def test_uniform_five_deltas(five):
    sp = five.secular
    assert np.max(np.abs(sp.deltas - np.array(NEQ5_DELTAS))) < 1e-12
    assert np.max(np.abs(np.sort(companion_roots(sp.p1).real) - NEQ5_DELTAS)) < 1e-12
    rounded = np.array([1.35556, 2.45608, 3.54390, 4.64442])
    assert np.max(np.abs(sp.deltas - rounded)) < 5e-5


def test_secular_pair_rejects_bad_input():
    with pytest.raises(NotHermitian):
        secular_pair(np.array([[1, 2], [0, 1.0]]), [1, 0])
    with pytest.raises(NotUnitVector):
        secular_pair(np.eye(2), [1, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 9))
def test_secular_identity_and_interlacing(seed, n):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, n)
    e = random_unit(rng, n)
    sp = secular_pair(a, e)
    assert sp.interlaces()
    b = np.outer(e, e.conj())
    for _ in range(3):
        g = complex(rng.normal(), rng.normal())
        lam = complex(rng.normal(), rng.normal())
        ref = np.linalg.det(a + g * b - lam * np.eye(n))
        val = np.polyval(sp.coefficients(g), lam)
        assert abs(val - ref) <= 1e-8 * max(abs(ref), 1.0) * 10 ** (n / 4)


def test_relative_determinant_cases(five, rank_two):
    assert relative_determinant(five.a, five.b, 0, 1 + 1j) == 1
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    g, lam = 0.7 + 0.4j, 2.2 + 0.3j
    assert abs(relative_determinant(five.a, five.b, g, lam) - (1 + g * h(lam))) < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = complex(rng.normal(), rng.normal())
        lam = complex(rng.uniform(0, 6), rng.normal())
        ref = det_ratio(rank_two.a, rank_two.b, g, lam)
        got = relative_determinant(rank_two.a, rank_two.b, g, lam)
        assert abs(got - ref) <= 1e-8 * max(abs(ref), 1e-300)


def test_gamma_of_lambda_branch_point(two_by_two):
    h = HerglotzFunction(rank_one_measure(two_by_two.a, two_by_two.rank_one_data[0]))
    lam_c = -0.5 + 1j * math.sqrt(3) / 2
    assert abs(gamma_of_lambda(h, lam_c) - (-1 + 1j * math.sqrt(3))) < 1e-12


def test_gamma_asymptotics(five):
    # m = -1/lam - <Ae,e>/lam^2 + ..., so the shift is minus <Ae,e> = 3
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    lam = 3 + 100j
    assert abs(gamma_of_lambda(h, lam) - (lam - 3)) < 1e-1
    for lam in (1e3j, 1e3 + 1e3j, -500 + 1e3j):
        g = gamma_of_lambda(h, lam)
        assert abs(g - (lam - 3)) * abs(lam) < 5
        spec = np.linalg.eigvals(five.a_gamma(g))
        assert np.min(np.abs(spec - lam)) < 1e-8 * abs(lam)


def test_gamma_of_lambda_rejects_lower_half_plane(five):
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    with pytest.raises(NotInUpperHalfPlane):
        gamma_of_lambda(h, 1 - 1j)


@pytest.mark.parametrize("seed", range(5))
def test_gamma_of_lambda_puts_lambda_in_spectrum(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 5)
    e = random_unit(rng, 5)
    h = HerglotzFunction(rank_one_measure(a, e))
    lam = complex(rng.normal(), rng.uniform(0.1, 2))
    g = gamma_of_lambda(h, lam)
    assert g.imag > 0
    spec = np.linalg.eigvals(a + g * np.outer(e, e.conj()))
    assert np.min(np.abs(spec - lam)) < 1e-9


def test_fibration_injective_on_grid(five):
    h = HerglotzFunction(rank_one_measure(five.a, five.rank_one_data[0]))
    xs = np.linspace(0, 6, 25)
    ys = np.linspace(0.05, 3, 20)
    lam = (xs[None, :] + 1j * ys[:, None]).ravel()
    g = -1 / h.evaluate_many(lam)
    d = np.abs(g[:, None] - g[None, :])
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_coupling_count_between_one_and_rank(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 6)
    z = rng.normal(size=(6, 3)) + 1j * rng.normal(size=(6, 3))
    h = HerglotzFunction(build_measure(a, z @ z.conj().T))
    for _ in range(10):
        lam = complex(rng.normal(), rng.uniform(0.05, 2))
        gs = couplings_at(h, lam)
        assert 1 <= gs.size <= 3
        assert np.all(gs.imag > 0)
        for g in gs:
            spec = np.linalg.eigvals(a + g * z @ z.conj().T)
            assert np.min(np.abs(spec - lam)) < 1e-7 * max(1, abs(g))


def test_measure_integrate_and_mask():
    mu = SpectralMeasure.scalar([0.0, 1.0, 2.0], [0.2, 0.3, 0.5])
    assert abs(mu.integrate(lambda s: s)[0, 0] - 1.3) < 1e-15
    assert abs(mu.mass_on(0.5, 2.5)[0, 0] - 0.8) < 1e-15
    assert list(mu.mask(0.5, 1.5)) == [False, True, False]


def test_coalesced_atoms():
    h = build_measure(np.diag([1.0, 1.0, 2.0]), np.eye(3))
    assert h.size == 2
    assert np.allclose(h.weights[0], np.diag([1, 1, 0]), atol=1e-14)
