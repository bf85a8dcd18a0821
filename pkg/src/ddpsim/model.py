"""Physical data: confining potentials, doping, recombination-generation.

Potentials are closed-form objects ``V(x) = rho/2 |x - c|^2 + sum a cos(k.x + phi)
+ c_norm`` so that gradients, Laplacians and convexity constants are exact.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .grid import Grid, exp_checked

logger = logging.getLogger(__name__)

#: Relative tolerance on the unit mass of ``e^{-V}`` before it counts as drift.
NORMALIZATION_DRIFT = 1e-4
#: Tail ratio above which the box is considered too small for the potential.
TAIL_WARNING = 1e-10


class HypothesisError(ValueError):
    """Raised when model data cannot be evaluated on the requested box."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class CosineTerm:
    """Bounded perturbation ``amplitude * cos(wavevector . x + phase)``."""

    amplitude: float
    wavevector: tuple[float, ...]
    phase: float = 0.0

    @property
    def k2(self) -> float:
        return float(np.dot(self.wavevector, self.wavevector))

    def argument(self, mesh):
        return sum(k * x for k, x in zip(self.wavevector, mesh)) + self.phase


@dataclass(frozen=True)
class Potential:
    """Uniformly convex confining potential.

    ``terms`` empty gives the plain quadratic form; otherwise the quadratic is
    shifted by bounded cosine terms.  ``c_norm`` is the additive constant that
    makes ``exp(-V)`` integrate to one; see :meth:`normalized`.
    """

    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    curvature: float = 1.0
    terms: tuple[CosineTerm, ...] = ()
    c_norm: float = 0.0

    def __post_init__(self):
        if not self.curvature > 0:
            raise ValueError(f"curvature must be positive, got {self.curvature}")
        for t in self.terms:
            if len(t.wavevector) != len(self.center):
                raise ValueError("cosine wavevector and center differ in dimension")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def form(self) -> str:
        return "shifted_quadratic" if self.terms else "quadratic"

    def _displacement(self, grid: Grid):
        if grid.dim != self.dim:
            raise ValueError(f"potential is {self.dim}D, grid is {grid.dim}D")
        return [x - c for x, c in zip(grid.mesh, self.center)]

    def raw(self, grid: Grid) -> np.ndarray:
        d = self._displacement(grid)
        v = 0.5 * self.curvature * sum(di * di for di in d)
        for t in self.terms:
            v = v + t.amplitude * np.cos(t.argument(grid.mesh))
        return v

    def value(self, grid: Grid) -> np.ndarray:
        return self.raw(grid) + self.c_norm

    def gradient(self, grid: Grid) -> list[np.ndarray]:
        d = self._displacement(grid)
        g = [self.curvature * di for di in d]
        for t in self.terms:
            s = np.sin(t.argument(grid.mesh))
            for i, k in enumerate(t.wavevector):
                g[i] = g[i] - t.amplitude * k * s
        return g

    def laplacian(self, grid: Grid) -> np.ndarray:
        lap = np.full(grid.shape, self.dim * self.curvature)
        for t in self.terms:
            lap = lap - t.amplitude * t.k2 * np.cos(t.argument(grid.mesh))
        return lap

    @property
    def convexity(self) -> float:
        """Lower bound on the smallest Hessian eigenvalue over all of space."""
        return self.curvature - sum(abs(t.amplitude) * t.k2 for t in self.terms)

    @property
    def laplacian_bound(self) -> float:
        """Bound on ``sup |Laplacian V|`` over all of space."""
        return self.dim * self.curvature + sum(abs(t.amplitude) * t.k2 for t in self.terms)

    @property
    def lower_bound(self) -> float:
        """Global lower bound of ``V`` (attained at the centre when unperturbed)."""
        return self.c_norm - sum(abs(t.amplitude) for t in self.terms)

    def normalized(self, grid: Grid) -> "Potential":
        """Copy with ``c_norm`` chosen so that ``sum(exp(-V)) h^dim == 1`` on ``grid``."""
        log_mass = logsumexp(-self.raw(grid)) + grid.dim * np.log(grid.h)
        return replace(self, c_norm=float(log_mass))


def quadratic(dim: int = 3, curvature: float = 1.0, center=None) -> Potential:
    center = (0.0,) * dim if center is None else tuple(float(c) for c in center)
    return Potential(center=center, curvature=curvature)


# ---------------------------------------------------------------------------
# recombination-generation


@dataclass(frozen=True, kw_only=True)
class Recombination:
    """Base of the rate ``R = F(n, p) (n p - delta^2 mu_n mu_p)``.

    ``sigma > 0`` switches on the cut-off ``phi -> phi / (1 + sigma phi)`` applied
    to every density argument of ``R``.
    """

    delta: float = 1.0
    sigma: float = 0.0

    kind = "abstract"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    def F(self, n, p):
        raise NotImplementedError

    @property
    def lipschitz_constant(self) -> float:
        """``c1`` with ``|F(a) - F(b)| <= c1 |a - b|_1`` on the nonnegative orthant."""
        raise NotImplementedError

    @property
    def growth_constant(self) -> float:
        """``c2`` with ``|F(n, p)| <= c2 (1 + |n| + |p|)`` on the nonnegative orthant."""
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, kw_only=True)
class BandToBand(Recombination):
    C: float = 1.0
    kind = "band_to_band"

    def __post_init__(self):
        super().__post_init__()
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")

    def F(self, n, p):
        return np.full(np.broadcast(n, p).shape, self.C)

    @property
    def lipschitz_constant(self):
        return 0.0

    @property
    def growth_constant(self):
        return self.C

    def params(self):
        return {"C": self.C}


@dataclass(frozen=True, kw_only=True)
class SRH(Recombination):
    """Shockley-Read-Hall: ``F = 1 / (r1 n + r2 p + r3)``."""

    r1: float = 1.0
    r2: float = 1.0
    r3: float = 1.0
    kind = "srh"

    def __post_init__(self):
        super().__post_init__()
        if min(self.r1, self.r2, self.r3) <= 0:
            raise ValueError("SRH coefficients r1, r2, r3 must be positive")

    def F(self, n, p):
        return 1.0 / (self.r1 * n + self.r2 * p + self.r3)

    @property
    def lipschitz_constant(self):
        return max(self.r1, self.r2) / self.r3 ** 2

    @property
    def growth_constant(self):
        return 1.0 / self.r3

    def params(self):
        return {"r1": self.r1, "r2": self.r2, "r3": self.r3}


@dataclass(frozen=True, kw_only=True)
class Auger(Recombination):
    """Auger: ``F = C_n n + C_p p``."""

    C_n: float = 1.0
    C_p: float = 1.0
    kind = "auger"

    def __post_init__(self):
        super().__post_init__()
        if min(self.C_n, self.C_p) <= 0:
            raise ValueError("Auger coefficients C_n, C_p must be positive")

    def F(self, n, p):
        return self.C_n * n + self.C_p * p

    @property
    def lipschitz_constant(self):
        return max(self.C_n, self.C_p)

    @property
    def growth_constant(self):
        return max(self.C_n, self.C_p)

    def params(self):
        return {"C_n": self.C_n, "C_p": self.C_p}


@dataclass(frozen=True, kw_only=True)
class Custom(Recombination):
    """User supplied ``F`` with declared constants; the validator only samples them."""

    func: Callable = None
    c1: float = 1.0
    c2: float = 1.0
    kind = "custom"

    def __post_init__(self):
        super().__post_init__()
        if self.func is None:
            raise ValueError("Custom recombination needs a callable F")

    def F(self, n, p):
        return np.asarray(self.func(n, p), dtype=float) + np.zeros(np.broadcast(n, p).shape)

    @property
    def lipschitz_constant(self):
        return self.c1

    @property
    def growth_constant(self):
        return self.c2

    def params(self):
        return {"c1": self.c1, "c2": self.c2}


RECOMBINATION_KINDS = {cls.kind: cls for cls in (BandToBand, SRH, Auger)}


# ---------------------------------------------------------------------------
# model data


@dataclass(frozen=True, eq=False)
class ModelData:
    """Immutable bundle of everything the equations need on one grid.

    Use :meth:`build` to normalise the potentials on the grid.  Derived cell
    fields (``Vn``, ``Vp``, ``mu_n``, ``mu_p``) and constants are computed once.
    """

    grid: Grid
    V_n: Potential
    V_p: Potential
    doping: np.ndarray
    rec: Recombination = field(default_factory=BandToBand)
    epsilon: float = 1.0

    Vn: np.ndarray = field(init=False, repr=False)
    Vp: np.ndarray = field(init=False, repr=False)
    mu_n: np.ndarray = field(init=False, repr=False)
    mu_p: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        doping = self.grid.check(self.doping, "doping").copy()
        doping.setflags(write=False)
        object.__setattr__(self, "doping", doping)
        for name, pot in (("Vn", self.V_n), ("Vp", self.V_p)):
            v = pot.value(self.grid)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name, v in (("mu_n", self.Vn), ("mu_p", self.Vp)):
            mu = np.exp(-v)
            mu.setflags(write=False)
            object.__setattr__(self, name, mu)

    @classmethod
    def build(cls, grid: Grid, V_n: Potential, V_p: Potential | None = None,
              doping=None, rec: Recombination | None = None,
              epsilon: float = 1.0) -> "ModelData":
        V_p = V_n if V_p is None else V_p
        doping = np.zeros(grid.shape) if doping is None else doping
        return cls(grid=grid, V_n=V_n.normalized(grid), V_p=V_p.normalized(grid),
                   doping=doping, rec=BandToBand() if rec is None else rec,
                   epsilon=epsilon)

    def with_rec(self, rec: Recombination) -> "ModelData":
        return ModelData(self.grid, self.V_n, self.V_p, self.doping, rec, self.epsilon)

    @property
    def rho_n(self) -> float:
        return self.V_n.convexity

    @property
    def rho_p(self) -> float:
        return self.V_p.convexity

    @property
    def K(self) -> float:
        return max(self.V_n.laplacian_bound, self.V_p.laplacian_bound)

    @property
    def V_b(self) -> float:
        return min(self.V_n.lower_bound, self.V_p.lower_bound)

    @property
    def gap_bound(self) -> float:
        """``K' = max |V_n - V_p|`` over the cells of the box."""
        return float(np.max(np.abs(self.Vn - self.Vp)))

    @property
    def mass_action(self) -> np.ndarray:
        """``delta^2 mu_n mu_p``, where ``R`` vanishes."""
        return self.rec.delta ** 2 * self.mu_n * self.mu_p


def eval_equilibria(m: ModelData, g: Grid | None = None):
    """Return ``(mu_n, mu_p) = (exp(-V_n), exp(-V_p))`` on ``g``.

    Raises
    ------
    HypothesisError
        If either equilibrium has drifted from unit mass by more than 1e-4,
        i.e. the potentials were normalised on a different, too small box.
    """
    if g is None or g == m.grid:
        g, mus = m.grid, (m.mu_n, m.mu_p)
    else:
        mus = (np.exp(-m.V_n.value(g)), np.exp(-m.V_p.value(g)))
    for name, mu in zip(("mu_n", "mu_p"), mus):
        mass = g.integrate(mu)
        if abs(mass - 1.0) > NORMALIZATION_DRIFT:
            raise HypothesisError(
                f"{name} integrates to {mass:.8g} on {g}; box too small or "
                "potential normalised on another grid")
    return mus


def _check_densities(n, p):
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    for name, a in (("n", n), ("p", p)):
        if np.any(a < 0):
            idx = tuple(int(i) for i in np.argwhere(a < 0)[0])
            raise ValueError(f"negative density {name}={a[idx]:.6g} at cell {idx}")
    return n, p


def cutoff(phi, sigma: float):
    """``phi / (1 + sigma phi)``; identity for ``sigma == 0``."""
    return phi if sigma == 0 else phi / (1.0 + sigma * phi)


def recombination_rate(n, p, m: ModelData) -> np.ndarray:
    n, p = _check_densities(n, p)
    return m.rec.F(n, p) * (n * p - m.mass_action)


def regularized_rate(n, p, m: ModelData) -> np.ndarray:
    """Rate with every density argument passed through the ``sigma`` cut-off."""
    sigma = m.rec.sigma
    if sigma == 0:
        return recombination_rate(n, p, m)
    n, p = _check_densities(n, p)
    return recombination_rate(cutoff(n, sigma), cutoff(p, sigma), m)


def reaction_outflow(n, p, m: ModelData):
    """Per-unit-density loss rates of ``n`` and ``p`` due to the reaction term.

    ``-R~`` contains ``-F~ n~ p~``; written as ``-(F~ p~ / (1 + sigma n)) n`` the
    coefficient is what an explicit step must resolve to stay nonnegative.
    """
    s = m.rec.sigma
    nc, pc = cutoff(n, s), cutoff(p, s)
    F = m.rec.F(nc, pc)
    lam_n = F * pc / (1.0 + s * n)
    lam_p = F * nc / (1.0 + s * p)
    return np.maximum(lam_n, 0.0), np.maximum(lam_p, 0.0)


def growth_constant(m: ModelData) -> float:
    """``C_sigma = c2 (1 + 2/sigma + 1/sigma^2)`` in ``|R~| <= C_sigma (mu_n mu_p + n + p)``."""
    s = m.rec.sigma
    if s <= 0:
        raise ValueError("growth constant needs sigma > 0")
    return m.rec.growth_constant * (1.0 + 2.0 / s + 1.0 / s ** 2)


def lipschitz_bound(m: ModelData) -> float:
    """Lipschitz constant of ``R~`` in the weighted ``L^2`` spaces.

    ``2 c1 e^{-2 V_b} + (2 c2 / sigma)(1 + 2 / sigma) + 2 c1 / sigma^2``.
    """
    s = m.rec.sigma
    if s <= 0:
        raise ValueError("the unregularized rate has no global Lipschitz constant; need sigma > 0")
    c1, c2 = m.rec.lipschitz_constant, m.rec.growth_constant
    return (2.0 * c1 * np.exp(-2.0 * m.V_b)
            + (2.0 * c2 / s) * (1.0 + 2.0 / s)
            + 2.0 * c1 / s ** 2)


def transform_variables(n, p, m: ModelData):
    """Return ``(u, v, A_n, A_p)`` with ``u = n e^{V_n/2}``, ``v = p e^{V_p/2}`` and
    ``A = |grad V|^2 / 4 - Laplacian(V) / 2 + K``."""
    g = m.grid
    n, p = g.check(n, "n"), g.check(p, "p")
    u = n * exp_checked(0.5 * m.Vn, "e^{V_n/2}")
    v = p * exp_checked(0.5 * m.Vp, "e^{V_p/2}")
    K = m.K
    A = []
    for pot in (m.V_n, m.V_p):
        grad2 = sum(gi * gi for gi in pot.gradient(g))
        A.append(0.25 * grad2 - 0.5 * pot.laplacian(g) + K)
    return u, v, A[0], A[1]


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    checks: list[Check]
    constants: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format(self) -> str:
        lines = [f"{c.name:5s} {'PASS' if c.passed else 'FAIL'}  {c.detail}" for c in self.checks]
        lines += [f"{k} = {v:.10g}" for k, v in self.constants.items()]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _sample_F(rec: Recombination, rng, samples: int):
    a = rng.uniform(0.0, 10.0, size=(2, samples))
    b = rng.uniform(0.0, 10.0, size=(2, samples))
    Fa, Fb = rec.F(a[0], a[1]), rec.F(b[0], b[1])
    c1, c2 = rec.lipschitz_constant, rec.growth_constant
    dist = np.abs(a[0] - b[0]) + np.abs(a[1] - b[1])
    lip_ok = np.all(np.abs(Fa - Fb) <= c1 * dist * (1 + 1e-12) + 1e-14)
    growth_ok = np.all(np.abs(Fa) <= c2 * (1.0 + a[0] + a[1]) * (1 + 1e-12))
    sign_ok = np.all(Fa >= 0) and np.all(Fb >= 0)
    return bool(lip_ok), bool(growth_ok), bool(sign_ok)


def validate_hypotheses(m: ModelData, g: Grid | None = None, samples: int = 10_000,
                        seed: int = 0) -> ValidationReport:
    """Machine-check the structural hypotheses on potentials, rate and doping.

    Failures are report entries; nothing is raised.
    """
    g = m.grid if g is None else g
    checks = []
    warnings = []

    rho_n, rho_p, K = m.rho_n, m.rho_p, m.K
    checks.append(Check(
        "H1a", rho_n > 0 and rho_p > 0 and np.isfinite(K),
        f"rho_n={rho_n:.6g} rho_p={rho_p:.6g} K={K:.6g}"))

    gap = np.abs(m.Vn - m.Vp)
    corner = tuple(int(i) for i in np.unravel_index(np.argmax(gap), gap.shape))
    where = tuple(round(float(g.centers[i]), 6) for i in corner)
    # the quadratic parts must coincide, otherwise |V_n - V_p| is unbounded
    same_quadratic = (np.isclose(m.V_n.curvature, m.V_p.curvature, rtol=1e-14, atol=0)
                      and np.allclose(m.V_n.center, m.V_p.center, rtol=0, atol=1e-14))
    checks.append(Check(
        "H1b", bool(same_quadratic),
        f"K'={gap.max():.6g} on box, max at cell {corner} x={where}"
        + ("" if same_quadratic else "; |V_n - V_p| grows without bound")))

    checks.append(Check("H2a", m.rec.delta > 0, f"delta={m.rec.delta:.6g}"))

    lip_ok, growth_ok, sign_ok = _sample_F(m.rec, np.random.default_rng(seed), samples)
    checks.append(Check(
        "H2b", lip_ok and growth_ok and sign_ok,
        f"{m.rec.kind}: c1={m.rec.lipschitz_constant:.6g} ({'ok' if lip_ok else 'violated'}), "
        f"c2={m.rec.growth_constant:.6g} ({'ok' if growth_ok else 'violated'}), "
        f"F>=0 {'ok' if sign_ok else 'violated'} on {samples} samples"))

    D = np.asarray(m.doping)
    finite = bool(np.all(np.isfinite(D)))
    d1 = g.lr_norm(D, 1) if finite else np.inf
    dinf = g.lr_norm(D, np.inf) if finite else np.inf
    checks.append(Check("H3", finite, f"|D|_1={d1:.6g} |D|_inf={dinf:.6g}"))

    for name, mu in (("mu_n", m.mu_n), ("mu_p", m.mu_p)):
        tail = _boundary_max(mu) / mu.max()
        if tail > TAIL_WARNING:
            warnings.append(f"{name} at box boundary is {tail:.3g} of its maximum; "
                            "consider a larger box")
        mass = g.integrate(mu)
        if abs(mass - 1.0) > NORMALIZATION_DRIFT:
            warnings.append(f"{name} integrates to {mass:.8g}")

    constants = {"rho_n": rho_n, "rho_p": rho_p, "K": K, "K_prime": float(gap.max()),
                 "V_b": m.V_b, "D_L1": d1, "D_Linf": dinf,
                 "c1": m.rec.lipschitz_constant, "c2": m.rec.growth_constant}
    for w in warnings:
        logger.warning(w)
    return ValidationReport(checks, constants, warnings)


def _boundary_max(f: np.ndarray) -> float:
    out = 0.0
    for ax in range(f.ndim):
        out = max(out, float(np.take(f, 0, axis=ax).max()), float(np.take(f, -1, axis=ax).max()))
    return out
