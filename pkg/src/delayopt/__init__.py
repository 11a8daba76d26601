"""Delay-optimal time sharing for a two-class priority queue.

Closed-form preempt-resume delay tables, a sigmoidal-utility optimizer for
the time-share split, a discrete-event simulation engine with a zoo of
baseline schedulers, and a sweep/validation harness with CSV output.
"""
from __future__ import annotations

from .alphaopt import (
    AlphaSolution,
    DegenerateGapError,
    NumericalInconsistencyError,
    OptimalityConstants,
    log_system_utility,
    optimality_constants,
    solve_alpha,
    z_prime,
)
from .config import AppConfig, ConfigError, load_config, parse_config, serialize_config
from .engine import (
    RNG_ALGORITHM,
    ClassMetrics,
    DepartureRecord,
    InsufficientDataError,
    MeanWithCI,
    ReplicateSummary,
    SimMetrics,
    SimSpec,
    WorkConservationError,
    replicate,
    replicate_seed,
    run,
)
from .harness import (
    ANALYTIC_SCHEDULER,
    CSV_COLUMNS,
    SCHEDULER_NAMES,
    SweepResult,
    SweepRow,
    SweepSpec,
    ValidationCheck,
    ValidationReport,
    config_with_lambda2,
    default_lambda2_grid,
    grid_from_range,
    policy_for,
    run_sweep,
    validate,
    write_sweep_csv,
)
from .mg1 import (
    BlendedDelays,
    PriorityDelayTable,
    blended_delay,
    delay_table,
    priority_delay,
    residual_work,
)
from .policies import (
    FairAlternation,
    MaxWeight,
    Policy,
    PriorityTo,
    QueueSnapshot,
    TimeShared,
    WeightedRoundRobin,
    wrr_weights,
)
from .traffic import ClassParams, SystemConfig, UnstableSystemError, UtilityCurve

__all__ = [
    "ANALYTIC_SCHEDULER",
    "AlphaSolution",
    "AppConfig",
    "BlendedDelays",
    "CSV_COLUMNS",
    "ClassMetrics",
    "ClassParams",
    "ConfigError",
    "DegenerateGapError",
    "DepartureRecord",
    "FairAlternation",
    "InsufficientDataError",
    "MaxWeight",
    "MeanWithCI",
    "NumericalInconsistencyError",
    "OptimalityConstants",
    "Policy",
    "PriorityDelayTable",
    "PriorityTo",
    "QueueSnapshot",
    "ReplicateSummary",
    "RNG_ALGORITHM",
    "SCHEDULER_NAMES",
    "SimMetrics",
    "SimSpec",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "SystemConfig",
    "TimeShared",
    "UnstableSystemError",
    "UtilityCurve",
    "ValidationCheck",
    "ValidationReport",
    "WeightedRoundRobin",
    "WorkConservationError",
    "blended_delay",
    "config_with_lambda2",
    "default_lambda2_grid",
    "delay_table",
    "grid_from_range",
    "load_config",
    "log_system_utility",
    "optimality_constants",
    "parse_config",
    "policy_for",
    "priority_delay",
    "replicate",
    "replicate_seed",
    "residual_work",
    "run",
    "run_sweep",
    "serialize_config",
    "solve_alpha",
    "validate",
    "write_sweep_csv",
    "z_prime",
]

__version__ = "0.1.0"
