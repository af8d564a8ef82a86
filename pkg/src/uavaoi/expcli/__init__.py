"""Experiment plumbing: configuration, scenarios, runs, benchmarks, charts and the CLI."""
from ..scenario import generate_scenario
from .bench import BenchResult, bench_scaling, fit_exponent
from .chart import emit_chart, render_svg
from .config import ExperimentConfig, load_config, override
from .experiment import (CSV_COLUMNS, ArtifactIOError, moving_average, read_csv,
                         relative_improvement, run_experiment)
from .fpkcheck import fpk_convergence

__all__ = [
    "ArtifactIOError", "BenchResult", "CSV_COLUMNS", "ExperimentConfig", "bench_scaling",
    "emit_chart", "fit_exponent", "fpk_convergence", "generate_scenario", "load_config",
    "moving_average", "override", "read_csv", "relative_improvement", "render_svg",
    "run_experiment",
]
