"""Shared oracles for the test suite."""
import numpy as np
from scipy.special import erf


def gaussian_charge(g, s=0.5):
    """Unit-total-charge Gaussian of standard deviation ``s`` centred at the origin."""
    return np.exp(-g.radius2() / (2 * s * s)) / ((2 * np.pi) ** (g.dim / 2) * s ** g.dim)


def gaussian_potential(r, s=0.5, epsilon=1.0):
    """Closed-form free-space potential ``erf(r / (sqrt(2) s)) / (4 pi eps^2 r)``."""
    return erf(r / (np.sqrt(2) * s)) / (4 * np.pi * epsilon ** 2 * r)


def gaussian_field(r, s=0.5, epsilon=1.0):
    """Radial derivative of :func:`gaussian_potential`."""
    a = np.sqrt(2) * s
    return (2 / np.sqrt(np.pi) * np.exp(-(r / a) ** 2) / (a * r)
            - erf(r / a) / r ** 2) / (4 * np.pi * epsilon ** 2)


def gaussian_errors(N, L=8.0, s=0.5):
    """``(relative error on r >= 2h, absolute L-inf error on r >= 0.5)`` of the FFT solve."""
    from ddpsim import Grid, PoissonSolver
    g = Grid(3, L, N)
    psi = PoissonSolver(g).solve(gaussian_charge(g, s))
    r = np.sqrt(g.radius2())
    exact = gaussian_potential(r, s)
    near = r >= 2 * g.h
    rel = np.max(np.abs(psi - exact)[near]) / np.max(np.abs(exact[near]))
    far = r >= 0.5
    return rel, np.max(np.abs(psi - exact)[far])


#: ``(number, passed, detail)`` lines collected by the acceptance suite.
ACCEPTANCE = []


def criterion(number, passed, detail):
    """Record and print one acceptance line, then assert it."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert passed, line
