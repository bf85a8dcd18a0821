"""Stationary Boltzmann-Poisson problem.

The steady state is ``n = D_n e^{-psi} mu_n``, ``p = D_p e^{psi} mu_p`` with
``D_n D_p = delta^2`` and ``int n - int p = alpha``; ``psi`` closes the loop
through the Poisson equation.  It is found by a damped fixed point on ``psi``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, exp_checked
from .model import ModelData
from .poisson import PoissonSolver, laplacian

logger = logging.getLogger(__name__)


class SteadyStateError(RuntimeError):
    """Fixed point did not converge; ``history`` holds the update norms."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True, eq=False)
class SteadyState:
    n_inf: np.ndarray
    p_inf: np.ndarray
    psi_inf: np.ndarray
    D_n: float
    D_p: float
    alpha: float
    I: float
    J: float
    residual_poisson: float
    residual_charge: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


def coefficients(psi, alpha: float, m: ModelData):
    """Return ``(I, J, D_n, D_p)`` for the potential ``psi``.

    ``I = int e^{-psi} mu_n`` and ``J = int e^{psi} mu_p``; see
    :func:`charge_coefficients`.
    """
    g = m.grid
    psi = g.check(psi, "psi")
    e_minus = exp_checked(-psi, "e^{-psi}")
    e_plus = exp_checked(psi, "e^{psi}")
    I = g.integrate(e_minus, m.mu_n)
    J = g.integrate(e_plus, m.mu_p)
    if not (I > 0 and J > 0 and math.isfinite(I) and math.isfinite(J)):
        raise ValueError(f"degenerate steady-state integrals I={I!r}, J={J!r}; psi out of range")
    return (I, J) + charge_coefficients(I, J, alpha, m.rec.delta)


def charge_coefficients(I: float, J: float, alpha: float, delta: float = 1.0):
    """Positive ``(D_n, D_p)`` with ``D_n D_p = delta^2`` and ``D_n I - D_p J = alpha``.

    The root is evaluated in the branch free of cancellation, which is
    algebraically the usual quadratic formula.
    """
    if not (I > 0 and J > 0):
        raise ValueError(f"I and J must be positive, got I={I!r}, J={J!r}")
    d2 = delta ** 2
    root = math.sqrt(alpha * alpha + 4.0 * d2 * I * J)
    if alpha >= 0:
        return (alpha + root) / (2.0 * I), 2.0 * d2 * I / (alpha + root)
    return 2.0 * d2 * J / (root - alpha), (root - alpha) / (2.0 * J)


def boltzmann_densities(psi, D_n: float, D_p: float, m: ModelData):
    return D_n * np.exp(-psi) * m.mu_n, D_p * np.exp(psi) * m.mu_p


def poisson_residual(n, p, psi, m: ModelData, epsilon: float | None = None) -> float:
    """``max |-eps^2 Lap_h psi - (n - p - D)|`` over interior cells."""
    eps = m.epsilon if epsilon is None else epsilon
    r = -eps ** 2 * laplacian(psi, m.grid) - (n - p - m.doping)
    return float(np.nanmax(np.abs(r)))


def solve_steady(m: ModelData, g: Grid | None = None, alpha: float = 0.0,
                 solver: PoissonSolver | None = None, theta: float = 0.5,
                 tol: float = 1e-10, max_iter: int = 500, psi0=None) -> SteadyState:
    """Damped fixed point ``psi <- (1 - theta) psi + theta G*(N - P - D)``.

    Parameters
    ----------
    m : ModelData
    g : Grid, optional
        Must equal ``m.grid``; accepted for symmetry with the other solvers.
    alpha : float
        Prescribed charge difference ``int (n - p)``.
    solver : PoissonSolver, optional
        Built from ``m`` if omitted.
    theta : float
        Damping in ``(0, 1]``.
    tol : float
        Stop once the sup norm of the update is below ``tol``.
    psi0 : array, optional
        Starting potential; zero by default.

    Raises
    ------
    SteadyStateError
        After ``max_iter`` iterations without convergence.
    """
    if g is not None and g != m.grid:
        raise ValueError("grid differs from the model grid")
    if not 0 < theta <= 1:
        raise ValueError(f"damping theta must lie in (0, 1], got {theta}")
    solver = PoissonSolver(m.grid, m.epsilon) if solver is None else solver
    psi = np.zeros(m.grid.shape) if psi0 is None else m.grid.check(psi0, "psi0").copy()

    history = []
    for it in range(1, max_iter + 1):
        _, _, D_n, D_p = coefficients(psi, alpha, m)
        N, P = boltzmann_densities(psi, D_n, D_p, m)
        psi_star = solver.solve(N - P - m.doping)
        update = theta * (psi_star - psi)
        psi = psi + update
        history.append(float(np.max(np.abs(update))))
        if history[-1] < tol:
            break
    else:
        raise SteadyStateError(
            f"steady state not converged after {max_iter} iterations "
            f"(last update {history[-1]:.3e}); reduce theta or enlarge the box", history)

    I, J, D_n, D_p = coefficients(psi, alpha, m)
    n_inf, p_inf = boltzmann_densities(psi, D_n, D_p, m)
    g = m.grid
    logger.info("steady state converged in %d iterations", it)
    return SteadyState(
        n_inf=n_inf, p_inf=p_inf, psi_inf=psi, D_n=D_n, D_p=D_p, alpha=alpha, I=I, J=J,
        residual_poisson=poisson_residual(n_inf, p_inf, psi, m),
        residual_charge=abs(g.integrate(n_inf) - g.integrate(p_inf) - alpha),
        iterations=it, history=history)


def steady_residual(s: SteadyState, m: ModelData, solver: PoissonSolver | None = None):
    """Recheck the stationary equations on the stored fields.

    Returns ``(r_poisson, r_charge, r_massaction)``: the interior sup norm of
    the discrete Poisson defect, ``|int n - int p - alpha|`` and
    ``max |n p - delta^2 mu_n mu_p|``.
    """
    g = m.grid
    eps = m.epsilon if solver is None else solver.epsilon
    r_poisson = poisson_residual(s.n_inf, s.p_inf, s.psi_inf, m, eps)
    r_charge = abs(g.integrate(s.n_inf) - g.integrate(s.p_inf) - s.alpha)
    r_mass = float(np.max(np.abs(s.n_inf * s.p_inf - m.mass_action)))
    return r_poisson, r_charge, r_mass
