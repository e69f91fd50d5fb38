"""Experiment harness: JSON config, CLI, verification suites, sweeps."""

from .cli import cli, main
from .config import ExperimentConfig, ResolvedExperiment, load_config, parse_config
from .sweep import run_sweep, sweep_csv
from .verify import (
    demo_optimality,
    report_all_pass,
    verify_half_linearization,
    verify_step_bounds,
)

__all__ = [
    "ExperimentConfig",
    "ResolvedExperiment",
    "cli",
    "demo_optimality",
    "load_config",
    "main",
    "parse_config",
    "report_all_pass",
    "run_sweep",
    "sweep_csv",
    "verify_half_linearization",
    "verify_step_bounds",
]
