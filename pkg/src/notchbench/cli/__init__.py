"""Experiment runner, persistence and reporting."""

from .config import ExperimentConfig, build_config, load_config, parse_lines
from .main import compare_agencies, main
from .persistence import ModelBundle, load_bundle, load_model, save_model
from .runner import EvalReport, run, run_experiment
from .figures import emit_figures, timeline_rows

__all__ = [
    "EvalReport", "ExperimentConfig", "ModelBundle", "build_config", "compare_agencies",
    "emit_figures", "load_bundle", "load_config", "load_model", "main", "parse_lines",
    "run", "run_experiment", "save_model", "timeline_rows",
]
