"""Experiment harness: configs, runner, traces, plots, verification, CLI."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .runner import RunResult, compare, run_experiment
from .traces import read_trace, render_plot, write_trace
from .verify import VerifyReport, verify_suite

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config",
           "RunResult", "compare", "run_experiment", "read_trace", "render_plot",
           "write_trace", "VerifyReport", "verify_suite"]
