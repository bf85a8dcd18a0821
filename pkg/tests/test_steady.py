import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddpsim.config import build_model, load_config
from ddpsim.grid import Grid
from ddpsim.model import ModelData, quadratic
from ddpsim.poisson import PoissonSolver
from ddpsim.steady import (SteadyState, SteadyStateError, charge_coefficients, coefficients,
                           solve_steady, steady_residual)


@pytest.fixture(scope="module")
def symmetric():
    g = Grid(3, 6.0, 24)
    m = ModelData.build(g, quadratic(3))
    return m, PoissonSolver(g)


@pytest.fixture(scope="module")
def asymmetric(request):
    from conftest import CONFIGS
    cfg = load_config(CONFIGS / "asymmetric.json")
    m = build_model(cfg)
    solver = PoissonSolver(m.grid)
    return cfg, m, solver, solve_steady(m, alpha=cfg.initial.alpha, solver=solver)


def test_charge_coefficient_examples():
    assert charge_coefficients(1.7, 1.7, 0.0) == pytest.approx((1.0, 1.0), rel=1e-15)
    D_n, D_p = charge_coefficients(1.0, 1.0, 3.0)
    assert D_n == pytest.approx((3 + np.sqrt(13)) / 2, rel=1e-15)
    assert D_p == pytest.approx((np.sqrt(13) - 3) / 2, rel=1e-14)
    assert D_n == pytest.approx(3.302776, abs=1e-6) and D_p == pytest.approx(0.302776, abs=1e-6)
    D_n, D_p = charge_coefficients(2.0, 1.0, 0.0)
    assert D_n == pytest.approx(np.sqrt(2) / 2, rel=1e-15)
    assert D_p == pytest.approx(np.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        charge_coefficients(0.0, 1.0, 0.0)


def test_coefficients_from_potential(symmetric):
    m, _ = symmetric
    I, J, D_n, D_p = coefficients(np.zeros(m.grid.shape), 0.0, m)
    assert I == pytest.approx(J, rel=1e-14)
    assert D_n == pytest.approx(1.0, rel=1e-14) and D_p == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(OverflowError):
        coefficients(np.full(m.grid.shape, 1e4), 0.0, m)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(-10, 10))
def test_coefficient_identities(I, J, alpha):
    D_n, D_p = charge_coefficients(I, J, alpha)
    assert D_n > 0 and D_p > 0
    assert abs(D_n * D_p - 1.0) <= 1e-14
    assert abs(D_n * I - D_p * J - alpha) <= 1e-12 * max(abs(alpha), D_n * I, D_p * J)


def test_symmetric_solution_is_trivial(symmetric):
    m, solver = symmetric
    s = solve_steady(m, alpha=0.0, solver=solver)
    assert isinstance(s, SteadyState)
    assert np.max(np.abs(s.psi_inf)) <= 1e-10
    assert np.allclose(s.n_inf, m.mu_n, rtol=1e-12, atol=0)
    assert np.allclose(s.p_inf, m.mu_p, rtol=1e-12, atol=0)
    assert s.D_n == pytest.approx(1.0, rel=1e-12) and s.D_p == pytest.approx(1.0, rel=1e-12)
    assert max(steady_residual(s, m, solver)) <= 1e-12


def test_converged_identities(asymmetric):
    cfg, m, _, s = asymmetric
    assert np.max(np.abs(s.n_inf * s.p_inf / m.mass_action - 1)) <= 1e-12
    assert abs(m.grid.integrate(s.n_inf) - m.grid.integrate(s.p_inf) - cfg.initial.alpha) <= 1e-8
    assert abs(s.D_n * s.D_p - 1) <= 1e-14
    assert s.n_inf.min() > 0 and s.p_inf.min() > 0
    assert s.residual_charge <= 1e-8


def test_residual_perturbations(symmetric):
    m, solver = symmetric
    s = solve_steady(m, alpha=0.0, solver=solver)
    g = m.grid
    psi = s.psi_inf.copy()
    psi[10, 11, 12] += 0.1
    bumped = SteadyState(s.n_inf, s.p_inf, psi, s.D_n, s.D_p, s.alpha, s.I, s.J, 0, 0, 0)
    r_poisson, _, r_mass = steady_residual(bumped, m, solver)
    r0 = steady_residual(s, m, solver)
    assert r_mass == r0[2]
    assert r_poisson == pytest.approx(0.1 * 2 * g.dim / g.h ** 2, rel=1e-6)
    doubled = SteadyState(2 * s.n_inf, s.p_inf, s.psi_inf, s.D_n, s.D_p, s.alpha, s.I, s.J,
                          0, 0, 0)
    expect = np.max(np.abs(2 * s.n_inf * s.p_inf - m.mu_n * m.mu_p))
    assert steady_residual(doubled, m, solver)[2] == pytest.approx(expect, rel=1e-12)


def test_initialization_independence(asymmetric):
    cfg, m, solver, s = asymmetric
    rng = np.random.default_rng(3)
    n_I = s.n_inf * rng.uniform(0.5, 1.5, m.grid.shape)
    p_I = s.p_inf * rng.uniform(0.5, 1.5, m.grid.shape)
    tol = 1e-10
    psi0 = solver.solve(n_I - p_I - m.doping)
    other = solve_steady(m, alpha=cfg.initial.alpha, solver=solver, tol=tol, psi0=psi0)
    assert np.max(np.abs(other.psi_inf - s.psi_inf)) <= 10 * tol


@pytest.mark.parametrize("name", ["symmetric", "asymmetric", "perturbed"])
def test_update_norm_monotone(name):
    from conftest import CONFIGS
    cfg = load_config(CONFIGS / f"{name}.json")
    m = build_model(cfg)
    alpha = 0.3 if name != "symmetric" else 0.1
    s = solve_steady(m, alpha=alpha, theta=0.5)
    h = np.array(s.history[3:])
    assert np.all(h[1:] <= h[:-1])


def test_max_iter_carries_history(symmetric):
    m, solver = symmetric
    with pytest.raises(SteadyStateError) as info:
        solve_steady(m, alpha=1.0, solver=solver, max_iter=3, tol=1e-300)
    assert len(info.value.history) == 3


def test_bad_damping(symmetric):
    with pytest.raises(ValueError):
        solve_steady(symmetric[0], theta=0.0)
