"""Configuration, persistence, replay, experiment runners and the CLI."""
from .config import NoiseConfig, RunConfig, load_config
from .io import (
    device_from_dict,
    device_to_dict,
    diagnosis_to_dict,
    plan_from_dict,
    plan_to_dict,
    read_plan,
    read_records,
    write_plan,
    write_results,
)
from .replay import ReplayExecutor, replay_executor
from .speedup import TimingModel, fit_n2_over_log, speedup_model

__all__ = [
    "NoiseConfig", "RunConfig", "load_config", "device_from_dict", "device_to_dict",
    "diagnosis_to_dict", "plan_from_dict", "plan_to_dict", "read_plan", "read_records",
    "write_plan", "write_results", "ReplayExecutor", "replay_executor", "TimingModel",
    "fit_n2_over_log", "speedup_model",
]
