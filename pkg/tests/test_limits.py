import cmath
import math

import numpy as np
import pytest

from perturbatrix import Problem
from perturbatrix.errors import InputError, NotInUpperHalfPlane, OutOfSector, UnboundedDerivative
from perturbatrix.herglotz import HerglotzFunction, rank_one_measure
from perturbatrix.limits import (
    LimitModel,
    boundary_curve,
    convergence_error,
    forbidden_region,
    m_infty,
    m_N,
    mu_grid,
    mu_N,
)

from oracles import cauchy_quad

UNIFORM = LimitModel.uniform()
LINEAR = LimitModel.linear()


def test_uniform_closed_form_at_i():
    assert abs(m_infty(UNIFORM, 1j) - complex(math.log(math.sqrt(2)), math.pi / 4)) < 1e-15
    assert abs(m_infty(UNIFORM, 1j) - cauchy_quad(lambda s: 1.0, 1j)) < 1e-10


def test_uniform_decays_at_infinity():
    vals = [abs(m_infty(UNIFORM, 0.5 + 1j * y)) for y in (1e2, 1e4, 1e6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-5


def test_linear_closed_form_at_i():
    expected = 1 + 1j * cmath.log(1 + 1j)
    assert abs(m_infty(LINEAR, 1j) - expected) < 1e-15
    assert abs(m_infty(LINEAR, 1j) - cauchy_quad(lambda s: s, 1j)) < 1e-10


@pytest.mark.parametrize("lam", [0.3 + 0.2j, 1.5 + 0.01j, -2 + 3j, 0.999 + 1e-4j])
def test_quadrature_path_matches_closed_forms(lam):
    for model, f in ((UNIFORM, lambda s: np.ones_like(s)), (LINEAR, lambda s: s)):
        generic = LimitModel.from_function(f)
        assert abs(m_infty(generic, lam) - m_infty(model, lam)) < 1e-9
    grid = LimitModel.from_grid([0, 0.5, 1], [0, 0.5, 1])
    assert abs(m_infty(grid, lam) - m_infty(LINEAR, lam)) < 1e-9


def test_piecewise_density_against_oracle():
    model = LimitModel.from_grid([0, 0.25, 0.6, 1], [1.0, 3.0, 0.5, 2.0])
    for lam in (0.5 + 0.5j, 0.1 + 2j, 2 + 0.3j):
        ref = cauchy_quad(lambda s: float(np.interp(s, model.nodes, model.values)), lam)
        assert abs(m_infty(model, lam) - ref) < 1e-9


def test_m_infty_requires_upper_half_plane():
    with pytest.raises(NotInUpperHalfPlane):
        m_infty(UNIFORM, 0.5)
    with pytest.raises(NotInUpperHalfPlane):
        m_infty(UNIFORM, np.array([1j, -1j]))


def test_strip_containment():
    rng = np.random.default_rng(0)
    lam = rng.normal(0.5, 2, 1000) + 1j * rng.exponential(1.0, 1000)
    for model in (UNIFORM, LINEAR):
        im = np.asarray(m_infty(model, lam)).imag
        assert np.all(im > 0) and np.all(im < math.pi * model.sup)


def test_masses_and_divergence_flags():
    assert UNIFORM.mass == 1.0 and LINEAR.mass == 0.5
    assert UNIFORM.divergence == (True, True)
    assert LINEAR.divergence == (False, True)
    grid = LimitModel.from_grid([0, 1], [0, 2])
    assert abs(grid.mass - 1.0) < 1e-14 and grid.divergence == (False, True)


def test_model_validation():
    with pytest.raises(InputError):
        LimitModel.from_grid([0, 0.5], [1, 1])
    with pytest.raises(InputError):
        LimitModel.from_grid([0, 1], [1, -1])
    with pytest.raises(InputError):
        UNIFORM.problem(0)
    with pytest.raises(InputError):
        UNIFORM.problem(513)


def test_m_N_is_herglotz_of_problem():
    for model in (UNIFORM, LINEAR):
        p = model.problem(40)
        h = HerglotzFunction(rank_one_measure(p.a, p.rank_one_data[0]))
        c = p.rank_one_data[1]
        for lam in (0.5 + 0.1j, 2 + 1j):
            assert abs(c * h(lam) - m_N(model, 40, lam)) < 1e-13


def test_uniform_m_N_definition():
    lam = 0.5 + 0.1j
    s = np.arange(1, 101) / 100
    assert abs(m_N(UNIFORM, 100, lam) - np.mean(1 / (s - lam))) < 1e-14


def test_mu_one_by_one_is_tight():
    p = Problem.rank_one(np.zeros((1, 1)), [1.0])
    for g in (1j, 0.3 + 0.2j, -2 + 5j):
        assert abs(mu_N(p, g) - g.imag) < 1e-15


def test_mu_rejects_lower_half_plane():
    with pytest.raises(OutOfSector):
        mu_N(UNIFORM.problem(10), -1j)


def test_mu_at_disc_center_decreases_with_n():
    g = 1j / (2 * math.pi)
    vals = [mu_N(UNIFORM.problem(n), g) for n in (25, 50, 100, 200, 400)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 0.05


def test_mu_outside_disc_converges_to_limit_root():
    g = 2j
    target = -1 / g

    # Newton for m_inf(lambda) = i/2; derivative of log(l-1) - log(l) is 1/(l-1) - 1/l
    lam = 0.5 + 1j
    for _ in range(50):
        f = m_infty(UNIFORM, lam) - target
        lam -= f / (1 / (lam - 1) - 1 / lam)
    assert abs(m_infty(UNIFORM, lam) - target) < 1e-14
    vals = [mu_N(UNIFORM.problem(n), g) for n in (50, 100, 200, 400)]
    errs = [abs(v - lam.imag) for v in vals]
    assert errs[-1] < 0.01 and errs[-1] < errs[0]
    assert min(vals) > 0.5 * lam.imag


def test_lower_bound_on_grid():
    p = UNIFORM.problem(60)
    re = np.linspace(-0.5, 0.5, 9)
    im = np.linspace(0.01, 0.5, 7)
    mu = mu_grid(p, re, im)
    assert mu.shape == (7, 9)
    assert np.all(mu >= im[:, None] / 60 - 1e-12)


def test_convergence_error_values():
    assert convergence_error(100, UNIFORM, 0.5 + 1j) == pytest.approx(0.005)
    assert convergence_error(200, UNIFORM, 0.5 + 1j) == pytest.approx(0.0025)
    assert convergence_error(100, UNIFORM, 0.5 + 0.1j) == pytest.approx(0.5)
    assert abs(m_N(UNIFORM, 100, 0.5 + 1j) - m_infty(UNIFORM, 0.5 + 1j)) <= 0.005
    with pytest.raises(UnboundedDerivative):
        convergence_error(10, LimitModel.from_grid([0, 1], [1, 1]), 1j)


def test_linear_derivative_bound_against_sampling():
    lam = 0.3 + 0.2j
    s = np.linspace(0, 1, 200001)
    k_prime = np.abs(-lam / (s - lam) ** 2)
    assert convergence_error(1, LINEAR, lam) * 2 >= k_prime.max() * (1 - 1e-9)


@pytest.mark.parametrize("model", [UNIFORM, LINEAR], ids=["uniform", "linear"])
def test_m_N_uniform_convergence_on_compact_grid(model):
    lam = (np.linspace(-0.5, 1.5, 7)[None, :] + 1j * np.linspace(0.2, 2, 5)[:, None]).ravel()
    ref = np.asarray(m_infty(model, lam))
    prev = math.inf
    for n in (25, 50, 100, 200):
        err = np.abs(np.asarray(m_N(model, n, lam)) - ref)
        assert np.all(err <= convergence_error(n, model, lam))
        assert err.max() < prev
        prev = err.max()


def test_boundary_curve_is_closed_and_fine():
    lam, sigma = boundary_curve(UNIFORM, 1e-4, 20.0)
    assert np.max(np.abs(np.diff(np.append(sigma, sigma[0])))) <= 0.02 + 1e-12
    assert np.all(lam.imag >= 1e-4 - 1e-15) and np.all(np.abs(lam) <= 20 + 1e-9)


def test_uniform_forbidden_region_is_the_disc():
    reg = forbidden_region(UNIFORM, 1e-8, 100.0, grid=200)
    assert reg.disc_center == pytest.approx(1j / (2 * math.pi))
    assert reg.disc_radius == pytest.approx(1 / (2 * math.pi))
    assert reg.disc_violations() == 0
    assert reg.hausdorff_to_disc() <= 0.02
    inside = reg.disc_center + 0.5 * reg.disc_radius * np.exp(1j * np.linspace(0, 6, 20))
    assert np.all(reg.is_forbidden(inside))
    outside = np.array([2j, 1 + 1j, -0.5 + 0.1j])
    assert not np.any(reg.is_forbidden(outside))


def test_half_supported_density_disc_radius():
    model = LimitModel.from_grid([0, 0.5, 0.5 + 1e-12, 1], [2, 2, 0, 0])
    assert model.sup == 2.0 and abs(model.mass - 1) < 1e-11
    reg = forbidden_region(model, 1e-3, 10.0, grid=60, refine=4)
    assert reg.disc_radius == pytest.approx(1 / (4 * math.pi))
    assert reg.disc_violations() == 0


def test_piecewise_exact_matches_quadrature_for_callables():
    nodes, values = [0, 0.3, 0.7, 1], [0.5, 2.0, 1.0, 1.5]
    exact = LimitModel.from_grid(nodes, values)
    quad = LimitModel.from_function(lambda s: np.interp(s, nodes, values))
    for lam in (0.3 + 1e-3j, 0.5 + 0.05j, -1 + 1j, 50 + 50j):
        assert abs(m_infty(exact, lam) - m_infty(quad, lam)) < 1e-9


def test_linear_boundary_curve_endpoints():
    reg = forbidden_region(LINEAR, 1e-8, 100.0, grid=50, refine=2)
    lam, g = reg.lam_curve, reg.gamma_curve
    bottom = (np.abs(lam.imag - 1e-8) < 1e-12) & (lam.real >= 0) & (lam.real <= 1)
    seg = g[bottom]
    order = np.argsort(lam.real[bottom])
    start, end = seg[order[0]], seg[order[-1]]
    assert abs(start - (-1)) < 1e-6
    assert abs(end) <= reg.artifact_radius
    assert abs(end) < 0.1


def test_region_serializes():
    reg = forbidden_region(UNIFORM, 1e-6, 20.0, grid=40, refine=2)
    d = reg.as_dict()
    assert set(d) == {"disc", "epsilon", "r", "artifact_radius", "polygon"}
    assert len(d["polygon"]) > 10


def test_forbidden_region_validation():
    with pytest.raises(InputError):
        forbidden_region(UNIFORM, 0.1, 100)
    with pytest.raises(InputError):
        forbidden_region(UNIFORM, 1e-8, 5)
