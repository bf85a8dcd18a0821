"""Bipolar drift-diffusion-Poisson simulator with confining potentials."""
from .config import SimConfig, build_problem, load_config, parse_config, serialize_config
from .dynamics import (AutoPositivity, CarrierState, Fixed, StepScheme, Trajectory,
                       level_set_measure, positivity_dt, run, sigma_sweep, step)
from .entropy import EntropyReport, convergence_report, entropy_dissipation, relative_entropy
from .grid import Grid
from .io import checkpoint_load, checkpoint_save, emit_timeseries
from .model import (SRH, Auger, BandToBand, Custom, ModelData, Potential, quadratic,
                    recombination_rate, regularized_rate, validate_hypotheses)
from .poisson import PoissonSolver
from .steady import SteadyState, coefficients, solve_steady, steady_residual

__version__ = "0.1.0"
