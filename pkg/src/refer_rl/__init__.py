"""Off-policy continuous-control RL with replay-memory trust regions.

The library trains small stochastic policies from a bounded replay of past
behavior, keeping the updates trustworthy by clipping far-policy samples and
penalizing divergence from the replayed behaviors. Three learners share the
machinery: an actor-critic with corrected off-policy returns, a deterministic
policy gradient pair, and a normalized-advantage Q function.
"""

from .config import TrainConfig, build_config, parse_config_file
from .envs import env_names, make_env
from .learners import make_learner
from .replay import Episode, EpisodeBuilder, ReplayMemory, classify, update_beta
from .training import Trainer, evaluate_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Episode",
    "EpisodeBuilder",
    "ReplayMemory",
    "TrainConfig",
    "Trainer",
    "build_config",
    "classify",
    "env_names",
    "evaluate_checkpoint",
    "make_env",
    "make_learner",
    "parse_config_file",
    "train",
    "update_beta",
    "__version__",
]
