"""Experiment harness: configs, runs, traces and plots."""

from .config import ExperimentConfig, load_config, parse_config
from .plot import render_svg_plot
from .runner import TraceRecord, run_experiment
from .trace import read_trace_csv, write_trace_csv

__all__ = [
    "ExperimentConfig",
    "TraceRecord",
    "load_config",
    "parse_config",
    "read_trace_csv",
    "render_svg_plot",
    "run_experiment",
    "write_trace_csv",
]
