from .bench import BenchConfig, BenchmarkReport, ablation_configs, run_benchmark, sweep_models, sweep_segment_len, write_report
from .config import ConfigError, load_config
from .suite import SyntheticSuite, synth_suite

__all__ = [
    "BenchConfig",
    "BenchmarkReport",
    "ConfigError",
    "SyntheticSuite",
    "ablation_configs",
    "load_config",
    "run_benchmark",
    "sweep_models",
    "sweep_segment_len",
    "synth_suite",
    "write_report",
]
