"""Experiment configuration, runner, acceptance suite and command line."""
from .config import CONFIG_SCHEMA, OUT_ENV, ExperimentConfig, default_out_dir
from .runner import RECORD_SCHEMA, RunRecord, replay, run_experiment

__all__ = ["CONFIG_SCHEMA", "OUT_ENV", "ExperimentConfig", "default_out_dir", "RECORD_SCHEMA",
           "RunRecord", "replay", "run_experiment"]
