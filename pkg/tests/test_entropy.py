import numpy as np
import pytest
from conftest import CONFIGS
from hypothesis import given, settings
from hypothesis import strategies as st

from ddpsim.config import build_problem, load_config
from ddpsim.dynamics import CarrierState, Trajectory, initial_state, run
from ddpsim.entropy import (convergence_report, entropy_dissipation, relative_entropy, report,
                            uniform_bounds)
from ddpsim.grid import Grid
from ddpsim.model import BandToBand, ModelData, quadratic
from ddpsim.poisson import PoissonSolver
from ddpsim.steady import SteadyState, solve_steady


@pytest.fixture(scope="module")
def eq_setup():
    cfg = load_config(CONFIGS / "asymmetric.json")
    pb = build_problem(cfg)
    return pb.model, pb.solver, pb.seed


def at_eq(eq):
    return CarrierState(0.0, eq.n_inf.copy(), eq.p_inf.copy(), eq.psi_inf.copy())


def test_entropy_zero_at_equilibrium(eq_setup):
    m, _, eq = eq_setup
    assert abs(relative_entropy(at_eq(eq), eq, m)) <= 1e-12


def test_entropy_ratio_two(eq_setup):
    m, _, eq = eq_setup
    s = CarrierState(0.0, 2 * eq.n_inf, eq.p_inf.copy(), eq.psi_inf.copy())
    expect = (2 * np.log(2) - 1) * m.grid.integrate(eq.n_inf)
    assert relative_entropy(s, eq, m) == pytest.approx(expect, rel=1e-12)
    assert 2 * np.log(2) - 1 == pytest.approx(0.386294, abs=1e-6)


def test_empty_cells_contribute_steady_density(eq_setup):
    m, _, eq = eq_setup
    s = CarrierState(0.0, np.zeros(m.grid.shape), eq.p_inf.copy(), eq.psi_inf.copy())
    assert relative_entropy(s, eq, m) == pytest.approx(m.grid.integrate(eq.n_inf), rel=1e-12)


def test_entropy_rejects_nonpositive_steady(eq_setup):
    m, _, eq = eq_setup
    bad = SteadyState(np.zeros(m.grid.shape), eq.p_inf, eq.psi_inf, 1, 1, 0, 1, 1, 0, 0, 0)
    with pytest.raises(ValueError):
        relative_entropy(at_eq(eq), bad, m)


def test_dissipation_zero_at_equilibrium(eq_setup):
    m, _, eq = eq_setup
    assert abs(entropy_dissipation(at_eq(eq), m, eq.D_n, eq.D_p)) <= 1e-12


def test_single_report_at_equilibrium(eq_setup):
    m, _, eq = eq_setup
    traj = Trajectory(states=[at_eq(eq)], steady=eq, model=m)
    (r,) = convergence_report(traj)
    assert abs(r.e) <= 1e-12 and r.l1_dist_n == 0.0 and r.l1_dist_p == 0.0
    assert r.charge == pytest.approx(eq.alpha, abs=1e-8)


def test_report_grid_mismatch(eq_setup):
    m, _, eq = eq_setup
    other = SteadyState(np.ones((4, 4, 4)), np.ones((4, 4, 4)), np.zeros((4, 4, 4)),
                        1, 1, 0, 1, 1, 0, 0, 0)
    with pytest.raises(ValueError):
        convergence_report(Trajectory(states=[at_eq(eq)], steady=other, model=m))


def test_uniform_bounds_are_sups(eq_setup):
    m, _, eq = eq_setup
    a, b = at_eq(eq), CarrierState(1.0, 3 * eq.n_inf, eq.p_inf, eq.psi_inf)
    reps = [report(a, eq, m), report(b, eq, m)]
    ub = uniform_bounds(reps)
    assert ub["linf_n"] == pytest.approx(3 * eq.n_inf.max())
    assert ub["mass_p"] == pytest.approx(m.grid.integrate(eq.p_inf))


@pytest.fixture(scope="module")
def regression_run():
    return run(load_config(CONFIGS / "perturbed.json"))


def test_regression_run_diagnostics(regression_run):
    reps = regression_run.reports
    e = np.array([r.e for r in reps])
    assert np.all(np.diff(e) <= 1e-8 * (1 + np.abs(e[:-1])))
    d = np.array([r.l1_dist_n for r in reps])
    assert np.all(np.diff(d[10:]) <= 0)
    assert d[-1] / d[0] <= 1e-3
    q = np.array([r.charge for r in reps])
    assert np.ptp(q) <= 1e-12 * abs(q[0])
    assert all(r.diss >= 0 for r in reps)
    assert all(np.isfinite(list(r.as_dict().values())).all() for r in reps)


small = Grid(3, 4.0, 8)
small_model = ModelData.build(small, quadratic(3), rec=BandToBand(C=2.0))
small_solver = PoissonSolver(small)
small_eq = solve_steady(small_model, alpha=0.2, solver=small_solver)


def _state(seed, sparse):
    rng = np.random.default_rng(seed)
    n, p = rng.uniform(0, 1, (2,) + small.shape)
    if sparse:
        n *= rng.uniform(size=small.shape) < 0.5
        p *= rng.uniform(size=small.shape) < 0.5
    return initial_state(n, p, small_model, small_solver)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_entropy_and_dissipation_nonnegative(seed, sparse):
    s = _state(seed, sparse)
    assert relative_entropy(s, small_eq, small_model) >= 0
    assert entropy_dissipation(s, small_model, small_eq.D_n, small_eq.D_p) >= 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_entropy_vanishes_only_at_equilibrium(seed):
    s = _state(seed, False)
    assert relative_entropy(s, small_eq, small_model) > 1e-10
