"""Numerical laboratory for 1-d backward doubly stochastic differential
equations on scaled Bernoulli random walks."""

__version__ = "0.1.0"

from ._backend import backend_name
from .errors import (
    BdsdeError,
    DivergentSeriesError,
    EmptyReportError,
    InvalidArgumentError,
    InvalidModelError,
    NumericFailureError,
    ResourceLimitError,
    StepTooCoarseError,
    UnknownModelError,
    UnsupportedModelError,
)
from .explicit_solver import explicit_step, solve_backward_explicit
from .grid_noise import (
    NoisePath,
    TimeGrid,
    WalkValues,
    enumerate_sign_sequences,
    make_grid,
    sample_path,
    walk_values,
)
from .model import (
    Coefficient,
    ProblemSpec,
    TerminalFunctional,
    builtin,
    registry_keys,
    validate_spec,
)
from .montecarlo import ConvergenceTable, McReport, convergence_study, estimate
from .oracle import (
    ExactSolution,
    apriori_bound_rhs,
    brute_force_expectation,
    exact_time_integral,
    exact_transport,
    gronwall_epsilon,
    martingale_representation,
)
from .picard import (
    ContractionDiagnostics,
    PicardIterate,
    picard_solve,
    picard_step,
    weighted_norm,
    zero_iterate,
)
from .spde import ForwardSpec, Surface, u_surface
from .tree_solver import (
    LevelValues,
    SolveReport,
    implicit_step,
    solve_backward,
    terminal_layer,
    theta_invert,
)

__all__ = [
    "__version__",
    "backend_name",
    "BdsdeError",
    "DivergentSeriesError",
    "EmptyReportError",
    "InvalidArgumentError",
    "InvalidModelError",
    "NumericFailureError",
    "ResourceLimitError",
    "StepTooCoarseError",
    "UnknownModelError",
    "UnsupportedModelError",
    "explicit_step",
    "solve_backward_explicit",
    "NoisePath",
    "TimeGrid",
    "WalkValues",
    "enumerate_sign_sequences",
    "make_grid",
    "sample_path",
    "walk_values",
    "Coefficient",
    "ProblemSpec",
    "TerminalFunctional",
    "builtin",
    "registry_keys",
    "validate_spec",
    "ConvergenceTable",
    "McReport",
    "convergence_study",
    "estimate",
    "ExactSolution",
    "apriori_bound_rhs",
    "brute_force_expectation",
    "exact_time_integral",
    "exact_transport",
    "gronwall_epsilon",
    "martingale_representation",
    "ContractionDiagnostics",
    "PicardIterate",
    "picard_solve",
    "picard_step",
    "weighted_norm",
    "zero_iterate",
    "ForwardSpec",
    "Surface",
    "u_surface",
    "LevelValues",
    "SolveReport",
    "implicit_step",
    "solve_backward",
    "terminal_layer",
    "theta_invert",
]
