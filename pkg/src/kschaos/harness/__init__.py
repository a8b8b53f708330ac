"""Experiment specs, the run driver and the ``ks`` command line."""

from .config import ExperimentSpec, validate_config
from .runner import RunManifest, run_experiment

__all__ = ["ExperimentSpec", "RunManifest", "run_experiment", "validate_config"]
