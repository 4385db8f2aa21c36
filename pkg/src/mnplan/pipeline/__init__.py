"""End-to-end orchestration: scene and data generation, training, benchmarking,
visualization and the command-line interface."""
from .config import ConfigError, RunConfig, from_dict, load_config
from .stages import BenchRecord, StageError, bench, gen_data, gen_envs, multimodal_eval, summarize, train

__all__ = ["ConfigError", "RunConfig", "from_dict", "load_config", "BenchRecord", "StageError", "bench",
           "gen_data", "gen_envs", "multimodal_eval", "summarize", "train"]
