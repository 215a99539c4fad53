"""Thin-film equation with Navier slip in the small-slip limit: an implicit
finite-difference solver, the support entropy and its diagnostics, and the
quasi-static Tanner-law droplet model it converges to."""

from .diagnostics import DiagnosticsRecord, TestFunction, compute_record
from .entropy import (
    B_eps,
    B_prime,
    B_quadrature,
    B_value,
    H0_value,
    H_delta_value,
    ModelParams,
    RegularizationParams,
    mobility,
    rho_field,
    sup_constant,
)
from .estimators import PowerLawFit, QuasiStaticModel, ThinFilmSimulator
from .experiments import compare_pde_qs, epsilon_sweep, power_law_fit
from .grid import Field, Grid, make_uniform_grid
from .quasistatic import DropletSet, QsConfig, corollary_bounds, qs_solve
from .solver import InitialConditionSpec, SolverAbort, SolverConfig, initial_condition, solve

__version__ = "0.1.0"

__all__ = [
    "B_eps", "B_prime", "B_quadrature", "B_value", "DiagnosticsRecord", "DropletSet", "Field",
    "Grid", "H0_value", "H_delta_value", "InitialConditionSpec", "ModelParams", "PowerLawFit",
    "QsConfig", "QuasiStaticModel", "RegularizationParams", "SolverAbort", "SolverConfig",
    "TestFunction", "ThinFilmSimulator", "compare_pde_qs", "compute_record", "corollary_bounds",
    "epsilon_sweep", "initial_condition", "make_uniform_grid", "mobility", "power_law_fit",
    "qs_solve", "rho_field", "solve", "sup_constant",
]
