"""Contrastive-attention unmasking order for masked generative transformers."""
from .guidance import GuidanceConfig, Mode
from .kernels import BACKEND
from .metrics import evaluate
from .prompt import PromptSpec, build_prompt_spec
from .sampler import Strategy, StrategyConfig, run
from .schedule import ScheduleConfig
from .synthmgt import SceneSpec, SyntheticMGT, gen_scene

__all__ = [
    "BACKEND",
    "GuidanceConfig",
    "Mode",
    "PromptSpec",
    "ScheduleConfig",
    "SceneSpec",
    "Strategy",
    "StrategyConfig",
    "SyntheticMGT",
    "build_prompt_spec",
    "evaluate",
    "gen_scene",
    "run",
]
