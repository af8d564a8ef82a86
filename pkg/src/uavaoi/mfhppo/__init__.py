"""Mean-field hybrid PPO: recurrent hybrid actor-critic trained with clipped PPO."""
from .buffer import RolloutBuffer
from .losses import (clip_bound, clipped_surrogate, gae, hybrid_entropy, normalize_advantages,
                     ppo_clip_loss, total_loss)
from .policy import CONT_DIM, PolicyNets, PolicySpec, sample_action
from .train import (Learner, TrainConfig, TrainResult, evaluate, learners_from_state,
                    make_learners, optimize, train)

__all__ = [
    "CONT_DIM", "Learner", "PolicyNets", "PolicySpec", "RolloutBuffer", "TrainConfig",
    "TrainResult", "clip_bound", "clipped_surrogate", "evaluate", "gae", "hybrid_entropy",
    "learners_from_state", "make_learners", "normalize_advantages", "optimize",
    "ppo_clip_loss", "sample_action", "total_loss", "train",
]
