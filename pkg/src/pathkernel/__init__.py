"""Sensitivity analysis for SDEs by damped path-kernel Monte Carlo.

Estimates derivatives of expected observables with respect to parameters of
the dynamics (drift, diffusion scale, initial condition), for both
finite-horizon expectations and stationary-measure averages, with built-in
finite-difference oracles and analytic reference models.
"""

from .estimators import SensitivityEstimate, estimate_ergodic, estimate_finite_time, summarize
from .integrator import (
    OVERFLOW_THRESHOLD,
    DegenerateDiffusionError,
    PathAccumulators,
    PathOverflowError,
    StepRecord,
    euler_step,
    kernel_increment,
    orbit_observable_averages,
    run_paths,
    run_paths_observable,
    simulate_path,
    step_record,
    tangent_step,
)
from .model import (
    ModelValidationError,
    Observable,
    ParamPoint,
    SdeModel,
    ValidationReport,
    as_param,
    check_affine_initial_condition,
    validate_model,
)
from .models import (
    CoordinateMeanObservable,
    CoordinateObservable,
    GaussModel,
    Lorenz96Model,
    OuModel,
    SquaredCoordinateObservable,
    build_model,
    build_observable,
    lorenz96_observable,
)
from .oracles import (
    FdOracleConfig,
    LyapunovEstimate,
    analytic_reference,
    fd_derivative_ergodic,
    fd_derivative_finite_time,
    top_lyapunov,
)
from .rng import RngStream, SequentialPathRng, gaussian_increment, path_increments
from .schedules import (
    BelSchedule,
    ConstantSchedule,
    HistoryView,
    Schedule,
    ScheduleError,
    StateDependentSchedule,
    bel_schedule,
    constant_schedule,
    parse_schedule,
    pure_kernel_schedule,
    state_dependent_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "BelSchedule",
    "ConstantSchedule",
    "CoordinateMeanObservable",
    "CoordinateObservable",
    "DegenerateDiffusionError",
    "FdOracleConfig",
    "GaussModel",
    "HistoryView",
    "Lorenz96Model",
    "LyapunovEstimate",
    "ModelValidationError",
    "Observable",
    "OuModel",
    "OVERFLOW_THRESHOLD",
    "ParamPoint",
    "PathAccumulators",
    "PathOverflowError",
    "RngStream",
    "Schedule",
    "ScheduleError",
    "SdeModel",
    "SensitivityEstimate",
    "SequentialPathRng",
    "SquaredCoordinateObservable",
    "StateDependentSchedule",
    "StepRecord",
    "ValidationReport",
    "analytic_reference",
    "as_param",
    "bel_schedule",
    "build_model",
    "build_observable",
    "check_affine_initial_condition",
    "constant_schedule",
    "estimate_ergodic",
    "estimate_finite_time",
    "euler_step",
    "fd_derivative_ergodic",
    "fd_derivative_finite_time",
    "gaussian_increment",
    "kernel_increment",
    "lorenz96_observable",
    "orbit_observable_averages",
    "parse_schedule",
    "path_increments",
    "pure_kernel_schedule",
    "run_paths",
    "run_paths_observable",
    "simulate_path",
    "state_dependent_schedule",
    "step_record",
    "summarize",
    "tangent_step",
    "top_lyapunov",
    "validate_model",
]
