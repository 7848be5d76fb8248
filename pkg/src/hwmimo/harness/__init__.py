"""Experiment orchestration: configuration, Monte-Carlo trials, sweeps, presets and CLI."""

from .config import ConfigError, SweepSpec, TrialConfig, load_config
from .trial import TrialError, TrialResult, run_trial, simulate, streams

__all__ = [
    "ConfigError",
    "SweepSpec",
    "TrialConfig",
    "TrialError",
    "TrialResult",
    "load_config",
    "run_trial",
    "simulate",
    "streams",
]
