"""Monte Carlo sweeps, aggregation and the command line."""

from .config import AXES, ExperimentConfig, load_config
from .harness import MetricsRow, aggregate, build_instance, run_sweep, write_results, write_summary

__all__ = [
    "AXES",
    "ExperimentConfig",
    "MetricsRow",
    "aggregate",
    "build_instance",
    "load_config",
    "run_sweep",
    "write_results",
    "write_summary",
]
