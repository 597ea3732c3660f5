"""Regret-aware skill discovery laboratory.

A desk-scale implementation of adversarial unsupervised skill discovery:
a skill-conditioned agent learns inside a bounded temporal representation
space while a population of Gaussian skill generators proposes skills
whose value is still improving (high regret), with a uniform-sampling
baseline mode and coverage / zero-shot evaluation.
"""

__version__ = "0.1.0"

from . import autodiff, buffers, checkpoint, config, evaluation, figures, maze, nets
from . import reprspace, runner, sac, skillgen, training
from .config import RunConfig, load_config
from .errors import (ConfigError, DegenerateDirection, EmptyBuffer, NumericError,
                     ProtocolError, RegretLabError, SkipUpdate)
from .training import Trainer

__all__ = [
    "autodiff", "buffers", "checkpoint", "config", "evaluation", "figures", "maze",
    "nets", "reprspace", "runner", "sac", "skillgen", "training",
    "RunConfig", "load_config", "Trainer",
    "RegretLabError", "ConfigError", "NumericError", "ProtocolError",
    "DegenerateDirection", "SkipUpdate", "EmptyBuffer",
]
