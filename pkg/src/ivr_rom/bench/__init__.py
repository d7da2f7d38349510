"""Solid body rotation benchmark harness."""

from .cases import (
    COUPLINGS,
    VARIANTS,
    BenchmarkProblem,
    CaseConfig,
    ErrorReport,
    OfflineData,
    compute_errors,
    initial_condition,
    prepare_offline,
    run_case,
    run_reference,
)
from .io import load_config, read_field_dump, save_config, write_field_dump, write_reports_csv
from .sweep import SweepResult, convergence_slope, sweep_basis

__all__ = [
    "COUPLINGS",
    "VARIANTS",
    "BenchmarkProblem",
    "CaseConfig",
    "ErrorReport",
    "OfflineData",
    "compute_errors",
    "initial_condition",
    "prepare_offline",
    "run_case",
    "run_reference",
    "load_config",
    "save_config",
    "read_field_dump",
    "write_field_dump",
    "write_reports_csv",
    "SweepResult",
    "convergence_slope",
    "sweep_basis",
]
