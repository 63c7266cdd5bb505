"""Power-study harness: configs, replication runner, reports and dataset IO."""

from .config import PRESETS, StudyConfig, load_config, preset_config
from .report import PowerCell, PowerTable
from .study import run_power_comparison, run_power_study, run_single_test

__all__ = [
    "PRESETS",
    "PowerCell",
    "PowerTable",
    "StudyConfig",
    "load_config",
    "preset_config",
    "run_power_comparison",
    "run_power_study",
    "run_single_test",
]
