"""Explicit finite-volume stepper for the bipolar drift-diffusion-Poisson system.

Electrons drift in ``psi + V_n`` and holes in ``-psi + V_p``.  Edge fluxes are
written as ``(a * c_lo - b * c_hi) / h`` with nonnegative ``a, b``, so the
explicit update stays nonnegative whenever ``dt`` times the total outflow
coefficient of every cell is at most one.  The reaction term is evaluated once
and subtracted from both species, which keeps ``sum(n - p)`` exact up to
rounding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelData, reaction_outflow, regularized_rate
from .poisson import PoissonSolver

logger = logging.getLogger(__name__)

BERNOULLI_SERIES = 1e-5


class PositivityError(RuntimeError):
    """A fixed time step would produce negative densities."""


class NonFiniteStateError(RuntimeError):
    pass


def bernoulli(z):
    """``B(z) = z / (e^z - 1)`` with the series branch near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < BERNOULLI_SERIES
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = z / np.expm1(z)
    out = np.where(small, 1.0 - 0.5 * z + z * z / 12.0, out)
    # e^z overflows for z > ~709 where B(z) is below the smallest normal anyway
    return np.where(np.isnan(out), 0.0, out)


@dataclass(frozen=True, eq=False)
class CarrierState:
    t: float
    n: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    step_count: int = 0


@dataclass(frozen=True)
class Fixed:
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"fixed dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class AutoPositivity:
    safety: float = 0.9

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")


@dataclass(frozen=True)
class StepScheme:
    flux: str = "scharfetter_gummel"
    dt_policy: Fixed | AutoPositivity = field(default_factory=AutoPositivity)

    def __post_init__(self):
        if self.flux not in ("scharfetter_gummel", "central_upwind"):
            raise ValueError(f"unknown flux {self.flux!r}")


def _edge_slices(dim: int, ax: int):
    lo = [slice(None)] * dim
    hi = [slice(None)] * dim
    lo[ax] = slice(0, -1)
    hi[ax] = slice(1, None)
    return tuple(lo), tuple(hi)


def edge_coefficients(phi: np.ndarray, h: float, flux: str):
    """Per axis ``(a, b)``: the face carries ``a c_lo - b c_hi`` from ``lo`` to ``hi``
    (already divided by the cell width, so it is a rate per unit volume)."""
    out = []
    for ax in range(phi.ndim):
        lo, hi = _edge_slices(phi.ndim, ax)
        d = phi[hi] - phi[lo]
        if flux == "scharfetter_gummel":
            a, b = bernoulli(d), bernoulli(-d)
        else:
            a, b = 1.0 + np.maximum(-d, 0.0), 1.0 + np.maximum(d, 0.0)
        out.append((a / h ** 2, b / h ** 2))
    return out


def _transport(c, coeffs):
    """Flux divergence and total outflow coefficient of density ``c``."""
    div = np.zeros_like(c)
    out = np.zeros_like(c)
    for ax, (a, b) in enumerate(coeffs):
        lo, hi = _edge_slices(c.ndim, ax)
        j = a * c[lo] - b * c[hi]
        div[lo] -= j
        div[hi] += j
        out[lo] += a
        out[hi] += b
    return div, out


def _potentials(s: CarrierState, m: ModelData):
    return s.psi + m.Vn, -s.psi + m.Vp


def _rates(s: CarrierState, m: ModelData, scheme: StepScheme):
    """Flux divergences and total outflow coefficients of both species."""
    h = m.grid.h
    phi_n, phi_p = _potentials(s, m)
    div_n, out_n = _transport(s.n, edge_coefficients(phi_n, h, scheme.flux))
    div_p, out_p = _transport(s.p, edge_coefficients(phi_p, h, scheme.flux))
    lam_n, lam_p = reaction_outflow(s.n, s.p, m)
    return div_n, div_p, out_n + lam_n, out_p + lam_p


def positivity_dt(s: CarrierState, m: ModelData, scheme: StepScheme) -> float:
    """Largest ``dt`` with ``dt * outflow <= safety`` in every cell, both species.

    A :class:`Fixed` policy is measured against safety one.
    """
    _, _, out_n, out_p = _rates(s, m, scheme)
    safety = scheme.dt_policy.safety if isinstance(scheme.dt_policy, AutoPositivity) else 1.0
    return safety / max(float(out_n.max()), float(out_p.max()))


def _choose_dt(out_n, out_p, scheme, dt_cap=None):
    worst = max(float(out_n.max()), float(out_p.max()))
    policy = scheme.dt_policy
    if isinstance(policy, AutoPositivity):
        dt = policy.safety / worst
    else:
        dt = policy.dt
        if dt * worst > 1.0:
            which, arr = ("n", out_n) if out_n.max() >= out_p.max() else ("p", out_p)
            cell = tuple(int(i) for i in np.unravel_index(np.argmax(arr), arr.shape))
            raise PositivityError(
                f"fixed dt={dt:.6g} violates positivity for {which} at cell {cell}; "
                f"maximal admissible dt is {1.0 / worst:.6g}")
    if dt_cap is not None:
        dt = min(dt, dt_cap)
    return dt


def step(s: CarrierState, m: ModelData, scheme: StepScheme, solver: PoissonSolver,
         dt_cap: float | None = None) -> CarrierState:
    """Advance one explicit Euler step.

    ``dt_cap`` shortens the step (used to land on sample times); it never
    lengthens it beyond the policy.
    """
    div_n, div_p, out_n, out_p = _rates(s, m, scheme)
    dt = _choose_dt(out_n, out_p, scheme, dt_cap)
    R = regularized_rate(s.n, s.p, m)
    n = s.n + dt * (div_n - R)
    p = s.p + dt * (div_p - R)
    psi = solver.solve(n - p - m.doping)
    return CarrierState(t=s.t + dt, n=n, p=p, psi=psi, step_count=s.step_count + 1)


def initial_state(n, p, m: ModelData, solver: PoissonSolver, t: float = 0.0) -> CarrierState:
    g = m.grid
    n = g.check(n, "n").copy()
    p = g.check(p, "p").copy()
    if n.min() < 0 or p.min() < 0:
        raise ValueError("initial densities must be nonnegative")
    return CarrierState(t=t, n=n, p=p, psi=solver.solve(n - p - m.doping))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    steady: object = None
    model: ModelData | None = None
    converged: bool = False

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]


def integrate(state: CarrierState, m: ModelData, scheme: StepScheme, solver: PoissonSolver,
              t_end: float, sample_interval: float, stop=None):
    """Step to ``t_end`` and yield the start state and every ``sample_interval`` after it.

    ``stop(state)`` returning true ends the run after the current sample.
    """
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")
    yield state
    if stop is not None and stop(state):
        return
    t0, k = state.t, 1
    eps_t = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - eps_t:
        target = min(t0 + k * sample_interval, t_end)
        while state.t < target - eps_t:
            state = step(state, m, scheme, solver, dt_cap=target - state.t)
            if not (np.all(np.isfinite(state.n)) and np.all(np.isfinite(state.p))):
                raise NonFiniteStateError(f"non-finite density at step {state.step_count}")
        state = replace(state, t=target) if abs(state.t - target) <= eps_t else state
        k += 1
        yield state
        if stop is not None and stop(state):
            return


def run(config, force: bool = False) -> Trajectory:
    """Run the simulation described by a :class:`~ddpsim.config.SimConfig`.

    The hypotheses are validated first; ``force`` runs anyway.
    """
    from .config import build_problem
    from .entropy import report as entropy_report
    from .model import HypothesisError, validate_hypotheses
    from .steady import solve_steady

    problem = build_problem(config)
    m, solver = problem.model, problem.solver
    if not force:
        report = validate_hypotheses(m)
        if not report.passed:
            raise HypothesisError("hypotheses failed:\n" + report.format())
    state = problem.initial
    alpha = m.grid.integrate(state.n - state.p)
    st = config.steady
    eq = solve_steady(m, alpha=alpha, solver=solver, theta=st.theta, tol=st.tol,
                      max_iter=st.max_iter)
    tol = config.stepping.tolerance

    def distance(s):
        return m.grid.lr_norm(s.n - eq.n_inf, 1) + m.grid.lr_norm(s.p - eq.p_inf, 1)

    traj = Trajectory(steady=eq, model=m)

    def stop(s):
        return distance(s) < tol

    stepping = config.stepping
    for s in integrate(state, m, problem.scheme, solver, stepping.t_end,
                       stepping.sample_interval, stop=stop):
        traj.states.append(s)
        traj.reports.append(entropy_report(s, eq, m))
        logger.debug("t=%.6g steps=%d e=%.6g", s.t, s.step_count, traj.reports[-1].e)
    traj.converged = distance(traj.states[-1]) < tol
    return traj


def level_set_measure(traj, k: float, grid=None) -> float:
    """``sup_t (|{n > k}| + |{p > k}|)`` over the sampled states."""
    if k < 0:
        raise ValueError("level k must be nonnegative")
    states = traj.states if isinstance(traj, Trajectory) else list(traj)
    grid = grid if grid is not None else traj.model.grid
    best = 0
    for s in states:
        best = max(best, int(np.count_nonzero(s.n > k)) + int(np.count_nonzero(s.p > k)))
    return best * grid.cell_volume


def total_mass_bound(s: CarrierState, m: ModelData) -> float:
    """Right side ``2 c2 int delta^2 mu_n mu_p (1 + n + p)`` of the mass growth inequality."""
    return 2.0 * m.rec.growth_constant * m.grid.integrate(m.mass_action * (1.0 + s.n + s.p))


def final_state(state, m: ModelData, scheme: StepScheme, solver: PoissonSolver, t_end: float):
    last = state
    for last in integrate(state, m, scheme, solver, t_end, max(t_end - state.t, 1e-300)):
        pass
    return last


def sigma_sweep(config, sigmas) -> list[tuple[float, float]]:
    """``|n_sigma(t_end) - n_0(t_end)|_1`` for each ``sigma``, all runs from the same data."""
    from .config import build_problem

    problem = build_problem(config)
    m, solver = problem.model, problem.solver
    t_end = config.stepping.t_end

    def run_with(sigma):
        ms = m.with_rec(replace(m.rec, sigma=float(sigma)))
        return final_state(problem.initial, ms, problem.scheme, solver, t_end)

    ref = run_with(0.0)
    out = []
    for sigma in sigmas:
        s = run_with(sigma)
        out.append((float(sigma), m.grid.lr_norm(s.n - ref.n, 1)))
        logger.info("sigma=%g distance=%.6g", sigma, out[-1][1])
    return out
