"""Relative entropy, entropy dissipation and convergence diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import kl_div

from .model import ModelData, cutoff, regularized_rate
from .poisson import gradient

#: Cells below this fraction of ``max(n)`` drop out of the log-gradient integral.
LOG_GRADIENT_CUTOFF = 1e-14
#: Clamp for ``ln(n p / mu_n mu_p)`` before multiplying by the rate.
LOG_CLAMP = 700.0


@dataclass(frozen=True)
class EntropyReport:
    t: float
    mass_n: float
    mass_p: float
    charge: float
    linf_n: float
    linf_p: float
    l2_n: float
    l2_p: float
    e: float
    diss: float
    l1_dist_n: float
    l1_dist_p: float

    def as_dict(self) -> dict:
        return asdict(self)


def relative_entropy(s, eq, m: ModelData) -> float:
    """Bregman distance of ``(n, p)`` to the steady state plus the field energy
    ``eps^2 / 2 * int |grad(psi - psi_inf)|^2``.

    Empty cells contribute ``n_inf`` (``0 ln 0 = 0``).
    """
    g = m.grid
    if np.any(eq.n_inf <= 0) or np.any(eq.p_inf <= 0):
        raise ValueError("steady densities must be strictly positive")
    bregman = g.integrate(kl_div(s.n, eq.n_inf)) + g.integrate(kl_div(s.p, eq.p_inf))
    dpsi = gradient(s.psi - eq.psi_inf, g)
    field = 0.5 * m.epsilon ** 2 * g.integrate(sum(d * d for d in dpsi))
    return bregman + field


def _fisher_term(c, ref, g):
    top = c.max()
    if top <= 0:
        return 0.0
    log_ratio = np.log(np.maximum(c, 1e-300 * top)) - np.log(ref)
    grad2 = sum(d * d for d in gradient(log_ratio, g))
    return g.integrate(np.where(c < LOG_GRADIENT_CUTOFF * top, 0.0, c * grad2))


def entropy_dissipation(s, m: ModelData, D_n: float, D_p: float) -> float:
    """Nonnegative dissipation ``int n |grad ln(n/N)|^2 + int p |grad ln(p/P)|^2
    + int R ln(n p / delta^2 mu_n mu_p)`` with ``N = D_n e^{-psi} mu_n`` and
    ``P = D_p e^{psi} mu_p``."""
    g = m.grid
    N = D_n * np.exp(-s.psi) * m.mu_n
    P = D_p * np.exp(s.psi) * m.mu_p
    sigma = m.rec.sigma
    nc, pc = cutoff(s.n, sigma), cutoff(s.p, sigma)
    R = regularized_rate(s.n, s.p, m)
    prod = nc * pc
    with np.errstate(divide="ignore"):
        log_ratio = np.clip(np.log(prod) - np.log(m.mass_action), -LOG_CLAMP, LOG_CLAMP)
    reaction = np.where(prod > 0, R * log_ratio, 0.0)
    return _fisher_term(s.n, N, g) + _fisher_term(s.p, P, g) + g.integrate(reaction)


def report(s, eq, m: ModelData) -> EntropyReport:
    g = m.grid
    return EntropyReport(
        t=float(s.t),
        mass_n=g.integrate(s.n),
        mass_p=g.integrate(s.p),
        charge=g.integrate(s.n - s.p),
        linf_n=g.lr_norm(s.n, np.inf),
        linf_p=g.lr_norm(s.p, np.inf),
        l2_n=g.lr_norm(s.n, 2),
        l2_p=g.lr_norm(s.p, 2),
        e=relative_entropy(s, eq, m),
        diss=entropy_dissipation(s, m, eq.D_n, eq.D_p),
        l1_dist_n=g.lr_norm(s.n - eq.n_inf, 1),
        l1_dist_p=g.lr_norm(s.p - eq.p_inf, 1),
    )


def convergence_report(traj, eq=None, m: ModelData | None = None) -> list[EntropyReport]:
    """One :class:`EntropyReport` per sampled state of ``traj``."""
    eq = traj.steady if eq is None else eq
    m = traj.model if m is None else m
    if eq.n_inf.shape != m.grid.shape:
        raise ValueError("steady state lives on a different grid")
    return [report(s, eq, m) for s in traj.states]


def uniform_bounds(reports) -> dict[str, float]:
    """Sup over time of the ``L^1``, ``L^2`` and ``L^inf`` norms of ``n`` and ``p``."""
    keys = ("mass_n", "mass_p", "l2_n", "l2_p", "linf_n", "linf_p")
    return {k: max(getattr(r, k) for r in reports) for k in keys}
